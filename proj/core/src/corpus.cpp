#include "sugmine/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sugmine/error.hpp"
#include "sugmine/random.hpp"
#include "sugmine/text.hpp"

namespace sugmine::corpus {
namespace {

using nlohmann::json;

[[noreturn]] void fail_at(std::string_view source, std::size_t line, std::string_view field,
                          std::string_view what) {
    std::ostringstream os;
    os << source << ":" << line << ": field '" << field << "': " << what;
    throw DataError(os.str());
}

void check_review(const Review& r, std::string_view source, std::size_t line) {
    try {
        validate_review(r);
    } catch (const DataError& e) {
        std::ostringstream os;
        os << source << ":" << line << ": " << e.what();
        throw DataError(os.str());
    }
}

Review review_from_json(const json& obj, std::string_view source, std::size_t line) {
    if (!obj.is_object()) fail_at(source, line, "<record>", "expected a JSON object");
    Review r;
    for (const auto& [key, value] : obj.items()) {
        if (key == "id") {
            if (!value.is_string()) fail_at(source, line, "id", "expected a string");
            r.id = value.get<std::string>();
        } else if (key == "text") {
            if (!value.is_string()) fail_at(source, line, "text", "expected a string");
            r.text = value.get<std::string>();
        } else if (key == "label") {
            if (value.is_null()) continue;
            if (!value.is_number_integer()) fail_at(source, line, "label", "expected 0 or 1");
            r.label = value.get<int>();
        } else if (key == "gold_suggestions") {
            if (value.is_null()) continue;
            if (!value.is_array()) fail_at(source, line, "gold_suggestions", "expected an array of strings");
            for (const auto& g : value) {
                if (!g.is_string()) fail_at(source, line, "gold_suggestions", "expected an array of strings");
                r.gold_suggestions.push_back(g.get<std::string>());
            }
        } else if (key == "domain") {
            if (value.is_null()) continue;
            if (!value.is_string()) fail_at(source, line, "domain", "expected a string");
            r.domain = value.get<std::string>();
        } else {
            fail_at(source, line, key, "unknown field");
        }
    }
    if (!obj.contains("id")) fail_at(source, line, "id", "missing");
    if (!obj.contains("text")) fail_at(source, line, "text", "missing");
    return r;
}

json review_to_json(const Review& r) {
    json obj = json::object();
    obj["id"] = r.id;
    obj["text"] = r.text;
    if (r.label) obj["label"] = *r.label;
    if (!r.gold_suggestions.empty()) obj["gold_suggestions"] = r.gold_suggestions;
    if (r.domain) obj["domain"] = *r.domain;
    return obj;
}

struct NumberedReview {
    Review review;
    std::size_t line;
};

std::vector<NumberedReview> parse_jsonl(std::string_view content, std::string_view source) {
    std::vector<NumberedReview> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (text::trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            fail_at(source, line_no, "<record>", std::string("invalid JSON: ") + e.what());
        }
        out.push_back({review_from_json(obj, source, line_no), line_no});
    }
    return out;
}

struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line;
};

// RFC 4180: quoted fields may contain commas, doubled quotes and line breaks.
std::vector<CsvRecord> split_csv(std::string_view content, std::string_view source) {
    if (content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);
    std::vector<CsvRecord> records;
    CsvRecord cur{{}, 1};
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t line = 1;
    auto end_field = [&] {
        cur.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = cur.fields.size() == 1 && cur.fields[0].empty();
        if (!blank) records.push_back(std::move(cur));
        cur = CsvRecord{{}, line};
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty() || field_was_quoted)
                fail_at(source, line, "<record>", "unexpected quote inside unquoted field");
            in_quotes = true;
            field_was_quoted = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line;
            end_record();
            break;
        default:
            if (field_was_quoted) fail_at(source, line, "<record>", "characters after closing quote");
            field.push_back(c);
        }
    }
    if (in_quotes) fail_at(source, cur.line, "<record>", "unterminated quoted field");
    if (!field.empty() || field_was_quoted || !cur.fields.empty()) end_record();
    return records;
}

std::vector<NumberedReview> parse_csv(std::string_view content, std::string_view source) {
    auto records = split_csv(content, source);
    std::vector<NumberedReview> out;
    if (records.empty()) return out;

    const auto& header = records.front().fields;
    const std::vector<std::string> base{"id", "text", "label", "gold_suggestions"};
    const bool with_domain = header.size() == 5 && header[4] == "domain";
    const bool base_ok = header.size() >= base.size() &&
                         std::equal(base.begin(), base.end(), header.begin());
    if (!base_ok || (header.size() != base.size() && !with_domain)) {
        fail_at(source, 1, "<header>", "expected columns id,text,label,gold_suggestions[,domain]");
    }

    for (std::size_t k = 1; k < records.size(); ++k) {
        const auto& rec = records[k];
        if (rec.fields.size() != header.size()) {
            fail_at(source, rec.line, "<record>",
                    "expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(rec.fields.size()));
        }
        Review r;
        r.id = rec.fields[0];
        r.text = rec.fields[1];
        const std::string& label = rec.fields[2];
        if (label == "0") r.label = 0;
        else if (label == "1") r.label = 1;
        else if (!label.empty()) fail_at(source, rec.line, "label", "expected 0, 1 or empty");
        std::string_view gold = rec.fields[3];
        while (!gold.empty()) {
            const auto sep = gold.find(kCsvGoldSeparator);
            r.gold_suggestions.emplace_back(gold.substr(0, sep));
            if (sep == std::string_view::npos) break;
            gold.remove_prefix(sep + kCsvGoldSeparator.size());
        }
        if (with_domain && !rec.fields[4].empty()) r.domain = rec.fields[4];
        out.push_back({std::move(r), rec.line});
    }
    return out;
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string fill(std::string_view tmpl, std::string_view value) {
    std::string out(tmpl);
    const auto pos = out.find("{x}");
    if (pos != std::string::npos) out.replace(pos, 3, value);
    return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, SplitMix64& rng) {
    return items[static_cast<std::size_t>(rng.below(items.size()))];
}

}  // namespace

Format parse_format(std::string_view name) {
    if (name == "jsonl") return Format::jsonl;
    if (name == "csv") return Format::csv;
    throw ConfigError("unknown dataset format '" + std::string(name) + "' (expected jsonl or csv)");
}

Format format_for_path(const std::filesystem::path& path) {
    const auto ext = text::to_lower(path.extension().string());
    if (ext == ".csv") return Format::csv;
    return Format::jsonl;
}

void validate_review(const Review& r) {
    if (r.id.empty()) throw DataError("field 'id': must be non-empty");
    if (text::trim(r.text).empty()) throw DataError("field 'text': must be non-empty after trimming");
    if (text::utf8_length(r.text) > kMaxReviewChars)
        throw DataError("field 'text': longer than " + std::to_string(kMaxReviewChars) + " characters");
    if (r.label && *r.label != 0 && *r.label != 1) throw DataError("field 'label': must be 0 or 1");
}

std::vector<Review> parse_dataset(std::string_view content, Format format, std::string_view source) {
    auto numbered = format == Format::jsonl ? parse_jsonl(content, source) : parse_csv(content, source);
    std::map<std::string, std::size_t, std::less<>> seen;
    std::vector<Review> out;
    out.reserve(numbered.size());
    for (auto& [review, line] : numbered) {
        check_review(review, source, line);
        auto [it, inserted] = seen.emplace(review.id, line);
        if (!inserted) {
            std::ostringstream os;
            os << source << ": duplicate id '" << review.id << "' at line " << line
               << " (first seen at line " << it->second << ")";
            throw DataError(os.str());
        }
        out.push_back(std::move(review));
    }
    return out;
}

std::vector<Review> load_dataset(const std::filesystem::path& path, Format format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), format, path.string());
}

std::string serialize_dataset(std::span<const Review> reviews, Format format) {
    std::string out;
    if (format == Format::jsonl) {
        for (const auto& r : reviews) {
            out += review_to_json(r).dump();
            out.push_back('\n');
        }
        return out;
    }
    const bool with_domain = std::any_of(reviews.begin(), reviews.end(),
                                         [](const Review& r) { return r.domain.has_value(); });
    out += with_domain ? "id,text,label,gold_suggestions,domain\r\n" : "id,text,label,gold_suggestions\r\n";
    for (const auto& r : reviews) {
        std::string gold;
        for (std::size_t i = 0; i < r.gold_suggestions.size(); ++i) {
            const auto& g = r.gold_suggestions[i];
            if (g.find(kCsvGoldSeparator) != std::string::npos || g.empty())
                throw DataError("review '" + r.id + "': gold suggestion cannot be encoded in CSV");
            if (i) gold += kCsvGoldSeparator;
            gold += g;
        }
        out += csv_escape(r.id) + "," + csv_escape(r.text) + "," +
               (r.label ? std::to_string(*r.label) : std::string()) + "," + csv_escape(gold);
        if (with_domain) out += "," + csv_escape(r.domain.value_or(""));
        out += "\r\n";
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const Review> reviews, Format format) {
    const std::string content = serialize_dataset(reviews, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
    out << content;
}

Tokenizer whitespace_tokenizer() {
    return [](std::string_view s) { return text::split_whitespace(s); };
}

DatasetStats dataset_stats(std::span<const Review> reviews, const Tokenizer& tokenizer) {
    DatasetStats stats;
    stats.total = reviews.size();
    if (reviews.empty()) return stats;

    std::vector<double> lengths;
    lengths.reserve(reviews.size());
    for (const auto& r : reviews) {
        if (r.label) (*r.label == 1 ? stats.positives : stats.negatives)++;
        lengths.push_back(static_cast<double>(tokenizer(r.text).size()));
    }
    // Sorting first makes the moments independent of input order.
    std::sort(lengths.begin(), lengths.end());
    double sum = 0.0;
    for (double v : lengths) sum += v;
    const double mean = sum / static_cast<double>(lengths.size());
    double ss = 0.0;
    for (double v : lengths) ss += (v - mean) * (v - mean);
    stats.token_length_min = lengths.front();
    stats.token_length_max = lengths.back();
    stats.token_length_mean = mean;
    stats.token_length_sd = std::sqrt(ss / static_cast<double>(lengths.size()));
    return stats;
}

SyntheticConfig default_synthetic_config() {
    SyntheticConfig c;
    c.directives = {
        {{"Should add {x} to the menu.", "They should add {x} to the menu.", "Please add {x} to the menu.",
          "Would be nice if they added {x} to the menu."},
         "Add {x} to the menu.",
         {"pictures", "calorie counts", "a kids section", "gluten free desserts", "prices"}},
        {{"My only complaint would be that they have to expand their menu a little to accommodate more {x}.",
          "I just wish there were a few more {x}!", "I wish they had more {x}.",
          "They really need to offer more {x}."},
         "Add more {x}.",
         {"vegetarian options", "vegan main dishes", "seasonal flavors", "dairy free choices",
          "vegetarian options for main dishes"}},
        {{"Please tell customers it will be a wait for {x}.", "Please notify customers on the wait for {x}.",
          "Would be nice if they told us about the wait time for {x} beforehand.",
          "Maybe don't tell people they can get in quickly for {x} if you might have a 2 hour wait."},
         "Notify customers about the wait time for {x}.",
         {"lunch", "online orders", "large groups", "reservations", "weekend brunch"}},
        {{"Waitress should not have to {x}.", "Staff should not have to {x}.",
          "Management should stop making servers {x}."},
         "Staff should not be required to {x}.",
         {"use their money for the jukebox", "pay for their own uniforms", "work the register alone"}},
        {{"Please fix {x}.", "You guys should really fix {x}.", "Would be nice if they repaired {x}."},
         "Fix {x}.",
         {"the broken restroom door", "the wobbly tables", "the parking lot lights", "the air conditioning"}},
        {{"Please add more {x}; it gets crowded in the evenings.", "I wish there were more {x} available.",
          "They should put in more {x}."},
         "Add more {x}.",
         {"outdoor seating", "chargers at tables", "high chairs", "booths"}},
    };
    c.filler_sentences = {
        "Best ice cream in town.",
        "All the flavors are great!",
        "Mint oreo is my favorite but it's seasonal!",
        "Food and service is great!",
        "I like their location.",
        "We tried their charcuterie board, lobster soup and steak.",
        "Our server was also wonderful.",
        "Everything else was fantastic!",
        "Loved the crispy fries.",
        "Friendly staff.",
        "One of the best chicken I have tasted in a while, nicely seasoned.",
        "Food was really good.",
        "The patio has a nice view of the river.",
        "We came here for a birthday dinner.",
        "Prices are reasonable for the portion size.",
        "The waffle cones are made fresh every morning.",
        "My kids loved the sprinkles.",
        "The music was a bit loud but fun.",
        "Came back twice this week.",
        "I had the queso empanada for main dish.",
        "Waited 20 minutes as they were very busy.",
        "The decor is cozy and bright.",
        "Our table was ready when we arrived.",
        "The coffee was strong and hot.",
        "Portions were huge.",
        "Great spot for a quick lunch.",
        "The staff remembered our names.",
        "Dessert was the highlight of the night.",
        "It was a little pricey but worth it.",
        "Clean restrooms and plenty of parking.",
    };
    c.confusable_templates = {
        "You should definitely try the {x}.",
        "If you visit, you should order the {x}.",
        "I wish I had ordered the {x} sooner.",
        "Please do yourself a favor and get the {x}.",
        "Would be nice to come back for the {x}.",
    };
    c.confusable_slot_values = {"mint oreo", "lobster soup", "queso empanada", "crispy fries",
                                "charcuterie board", "waffle cone"};
    return c;
}

SyntheticConfig standard_synthetic_config() {
    SyntheticConfig c = default_synthetic_config();
    c.size = 1000;
    c.positive_rate = 0.15;
    c.label_noise = 0.05;
    c.confusable_rate = 0.10;
    return c;
}

std::vector<Review> generate_synthetic_corpus(const SyntheticConfig& config, std::uint64_t seed) {
    if (!(config.positive_rate >= 0.0 && config.positive_rate <= 1.0))
        throw ConfigError("positive_rate must lie in [0, 1]");
    if (!(config.label_noise >= 0.0 && config.label_noise <= 1.0))
        throw ConfigError("label_noise must lie in [0, 1]");
    if (!(config.confusable_rate >= 0.0 && config.confusable_rate <= 1.0))
        throw ConfigError("confusable_rate must lie in [0, 1]");
    if (config.size < 1) throw ConfigError("corpus size must be at least 1");
    if (config.min_filler_sentences > config.max_filler_sentences)
        throw ConfigError("min_filler_sentences exceeds max_filler_sentences");
    if (config.filler_sentences.empty()) throw ConfigError("filler_sentences must be non-empty");
    if (config.positive_rate > 0.0 && config.directives.empty())
        throw ConfigError("directives must be non-empty when positive_rate > 0");
    for (const auto& d : config.directives) {
        if (d.phrasings.empty() || d.slot_values.empty() || d.suggestion.empty())
            throw ConfigError("directive families need phrasings, a suggestion and slot values");
    }
    if (config.confusable_rate > 0.0 &&
        (config.confusable_templates.empty() || config.confusable_slot_values.empty()))
        throw ConfigError("confusable_rate > 0 needs confusable templates and slot values");

    SplitMix64 rng(seed);
    const auto n_pos = static_cast<std::size_t>(
        std::llround(config.positive_rate * static_cast<double>(config.size)));
    std::vector<char> positive(config.size, 0);
    std::fill_n(positive.begin(), n_pos, 1);
    shuffle(std::span<char>(positive), rng);

    const std::size_t width = std::max<std::size_t>(5, std::to_string(config.size).size());
    std::vector<Review> out;
    out.reserve(config.size);
    for (std::size_t i = 0; i < config.size; ++i) {
        const std::size_t span = config.max_filler_sentences - config.min_filler_sentences + 1;
        const std::size_t n_fill = config.min_filler_sentences + static_cast<std::size_t>(rng.below(span));
        std::vector<std::string> sentences;
        for (std::size_t k = 0; k < n_fill; ++k) sentences.push_back(pick(config.filler_sentences, rng));

        Review r;
        std::string idx = std::to_string(i + 1);
        r.id = config.id_prefix + std::string(width - idx.size(), '0') + idx;
        r.domain = config.domain;

        if (positive[i]) {
            const auto& family = pick(config.directives, rng);
            const auto& slot = pick(family.slot_values, rng);
            const auto pos = static_cast<std::size_t>(rng.below(sentences.size() + 1));
            sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos),
                             fill(pick(family.phrasings, rng), slot));
            r.label = 1;
            r.gold_suggestions.push_back(fill(family.suggestion, slot));
            if (rng.uniform() < config.label_noise) {
                r.label = 0;
                r.gold_suggestions.clear();
            }
        } else {
            r.label = 0;
            if (rng.uniform() < config.confusable_rate) {
                const auto pos = static_cast<std::size_t>(rng.below(sentences.size() + 1));
                sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos),
                                 fill(pick(config.confusable_templates, rng),
                                      pick(config.confusable_slot_values, rng)));
            }
        }
        for (std::size_t k = 0; k < sentences.size(); ++k) {
            if (k) r.text.push_back(' ');
            r.text += sentences[k];
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sugmine::corpus
