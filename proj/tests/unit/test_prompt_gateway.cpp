#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sugmine/error.hpp"
#include "sugmine/gateway.hpp"
#include "sugmine/prompt.hpp"

using namespace sugmine;
using namespace sugmine::llm;

TEST_CASE("template substitution") {
    CHECK(substitute("Hello {name}!", {{"name", "Ana"}}) == "Hello Ana!");
    CHECK(substitute("{{literal}} {x}", {{"x", "1"}}) == "{literal} 1");
    CHECK(substitute("{a}{b}{a}", {{"a", "x"}, {"b", "y"}}) == "xyx");
    // bound values are not rescanned
    CHECK(substitute("{review}", {{"review", "I love {braces} and }}"}}) == "I love {braces} and }}");
    CHECK_THROWS_WITH_AS(substitute("{a} {missing}", {{"a", "x"}}), doctest::Contains("missing"), ConfigError);
    CHECK_THROWS_AS(substitute("{unterminated", {}), ConfigError);
    CHECK_THROWS_AS(substitute("stray } brace", {}), ConfigError);
    CHECK_THROWS_AS(substitute("empty {}", {}), ConfigError);

    PromptTemplate t;
    t.user_template = "{b} then {a} then {b} {{c}}";
    CHECK(t.placeholders() == std::vector<std::string>{"b", "a"});
}

TEST_CASE("template names") {
    for (auto n : {TemplateName::extraction, TemplateName::category_assignment, TemplateName::clustering_pairwise,
                   TemplateName::cluster_summarization, TemplateName::cluster_consolidation,
                   TemplateName::cluster_naming})
        CHECK(parse_template_name(to_string(n)) == n);
    CHECK(to_string(TemplateName::clustering_pairwise) == "clustering_pairwise");
    CHECK_THROWS_AS(parse_template_name("bogus"), ConfigError);
}

TEST_CASE("render message order") {
    const auto lib = PromptLibrary::standard();
    const auto& t = lib.extraction;
    const auto msgs = render(t, {{"review", "Please add parking."}});
    REQUIRE(msgs.size() == 1 + 2 * t.few_shot_examples.size() + 1);
    CHECK(msgs.front().role == Role::system);
    CHECK(msgs.front().content == t.system_text);
    for (std::size_t i = 0; i < t.few_shot_examples.size(); ++i) {
        CHECK(msgs[1 + 2 * i].role == Role::user);
        CHECK(msgs[2 + 2 * i].role == Role::assistant);
        CHECK(msgs[2 + 2 * i].content == t.few_shot_examples[i].output);
    }
    CHECK(msgs.back().role == Role::user);
    CHECK(msgs.back().content.find("Please add parking.") != std::string::npos);
    CHECK(t.system_text.find("NONE") != std::string::npos);

    PromptTemplate bare;
    bare.user_template = "{x}";
    const auto one = render(bare, {{"x", "y"}});
    REQUIRE(one.size() == 1);
    CHECK(one[0] == ChatMessage{Role::user, "y"});
}

TEST_CASE("standard prompts expose the expected placeholders") {
    const auto lib = PromptLibrary::standard();
    CHECK(lib.extraction.placeholders() == std::vector<std::string>{"review"});
    CHECK(lib.clustering_pairwise.placeholders() == std::vector<std::string>{"first", "second"});
    CHECK(lib.cluster_summarization.placeholders() == std::vector<std::string>{"suggestions"});
    const auto cat = lib.category_assignment.placeholders();
    CHECK(std::find(cat.begin(), cat.end(), "categories") != cat.end());
    CHECK(std::find(cat.begin(), cat.end(), "suggestion") != cat.end());
    for (auto n : {TemplateName::extraction, TemplateName::category_assignment, TemplateName::clustering_pairwise,
                   TemplateName::cluster_summarization, TemplateName::cluster_consolidation,
                   TemplateName::cluster_naming}) {
        CHECK(lib.get(n).name == n);
        CHECK_FALSE(lib.get(n).system_text.empty());
    }
    const auto pair = render(lib.clustering_pairwise, {{"first", "A"}, {"second", "B"}});
    CHECK(pair.front().content.find(kSameTheme) != std::string::npos);
    CHECK(pair.front().content.find(kDifferentTheme) != std::string::npos);
    const auto cons = render(lib.cluster_consolidation, {{"category", "Menu"}, {"suggestions", "- a"}});
    CHECK(cons.front().content.find(kNotCohesive) != std::string::npos);
}

TEST_CASE("category prompt lists every label") {
    const auto lib = PromptLibrary::standard();
    const std::vector<std::string> cats{"Menu", "Wait Time", "Service"};
    Gateway gw(std::make_shared<MockBackend>(), {}, lib);
    const auto req = gw.make_request(TemplateName::category_assignment,
                                     {{"categories", bullet_list(cats)},
                                      {"default_category", "Miscellaneous"},
                                      {"suggestion", "Add pictures to the menu."}});
    const auto user = req.user_content();
    for (const auto& c : cats) CHECK(user.find("- " + c) != std::string::npos);
    CHECK(req.template_name == TemplateName::category_assignment);
    CHECK(req.model == "gemma3:27b");
    CHECK(bullet_list(cats) == "- Menu\n- Wait Time\n- Service");
    CHECK(bullet_list(std::vector<std::string>{}).empty());
}

TEST_CASE("parse extraction") {
    auto p = parse_extraction("  Add pictures to the menu.  ");
    CHECK(*p.suggestion == "Add pictures to the menu.");
    CHECK_FALSE(p.warning);
    CHECK_FALSE(parse_extraction("NONE").suggestion);
    CHECK_FALSE(parse_extraction(" none \n").suggestion);
    p = parse_extraction("Add parking.\nAlso fix the door.");
    CHECK(*p.suggestion == "Add parking.");
    CHECK(p.warning);
    CHECK_THROWS_AS(parse_extraction("   \n"), ProtocolError);
}

TEST_CASE("parse choice") {
    const std::vector<std::string> labels{"Menu", "Wait Time", "Service"};
    CHECK(parse_choice("Menu", labels) == "Menu");
    CHECK(parse_choice(" wait time \n", labels) == "Wait Time");
    CHECK(parse_choice("The category is: Service.", labels) == "Service");
    try {
        parse_choice("banana", labels);
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(e.raw_content() == "banana");
    }
    CHECK_THROWS_AS(parse_choice("Menu or Service", labels), ProtocolError);
    const std::vector<std::string> verdicts{std::string(kSameTheme), std::string(kDifferentTheme)};
    CHECK(parse_choice("SAME_THEME", verdicts) == kSameTheme);
    CHECK(parse_choice("different_theme", verdicts) == kDifferentTheme);
}

TEST_CASE("request wire format") {
    LlmRequest r;
    r.model = "m";
    r.messages = {{Role::system, "sys"}, {Role::user, "hi"}};
    r.max_tokens = 64;
    const auto j = nlohmann::json::parse(r.to_wire_json());
    CHECK(j["model"] == "m");
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["messages"][1]["content"] == "hi");
    CHECK(j["temperature"] == 0.0);
    CHECK(j["max_tokens"] == 64);
    CHECK(j["stream"] == false);
    CHECK_FALSE(j.contains("template_name"));
    CHECK(r.user_content() == "hi");

    auto bad = r;
    bad.model.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = r;
    bad.messages.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = r;
    bad.max_tokens = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("completion parsing") {
    const auto r = parse_completion(completion_body("Hello", "length"));
    CHECK(r.content == "Hello");
    CHECK(r.finish_reason == "length");
    CHECK_THROWS_AS(parse_completion("<html>oops</html>"), ProtocolError);
    CHECK_THROWS_AS(parse_completion(R"({"choices": []})"), ProtocolError);
    CHECK_THROWS_AS(parse_completion(R"({"choices": [{"message": {}}]})"), ProtocolError);
}

TEST_CASE("retry policy") {
    RetryPolicy p;
    CHECK(p.max_retries == 3);
    CHECK(p.backoff(1) == Millis{500});
    CHECK(p.backoff(2) == Millis{1000});
    CHECK(p.backoff(3) == Millis{2000});
    CHECK(p.backoff(10) == Millis{8000});
    p.multiplier = 0.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    GatewayConfig g;
    g.concurrency = 0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = {};
    g.timeout = Millis{0};
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

namespace {

/// Plays back a script of replies; entries with status 0 throw TransportError,
/// -2 throws TimeoutError.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<RawReply> script) : script_(std::move(script)) {}
    RawReply send(const LlmRequest&) override {
        const auto r = script_.at(std::min(sends_++, script_.size() - 1));
        if (r.status == 0) throw TransportError("connection refused");
        if (r.status == -2) throw TimeoutError("timed out");
        return r;
    }
    std::size_t sends_ = 0;

private:
    std::vector<RawReply> script_;
};

GatewayConfig fast_retry() {
    GatewayConfig c;
    c.retry.initial_backoff = Millis{0};
    c.retry.max_backoff = Millis{0};
    return c;
}

LlmRequest simple_request() {
    LlmRequest r;
    r.model = "m";
    r.messages = {{Role::user, "hello"}};
    return r;
}

}  // namespace

TEST_CASE("gateway retries") {
    const RawReply ok{200, completion_body("fine")};
    SUBCASE("5xx then success") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{500, ""}, {503, ""}, ok});
        Gateway gw(b, fast_retry());
        const auto r = gw.complete(simple_request());
        CHECK(r.content == "fine");
        CHECK(r.attempt_count == 3);
        CHECK(gw.attempt_count() == 3);
        CHECK(gw.request_count() == 1);
    }
    SUBCASE("429 and transport errors are retried") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{429, ""}, {0, ""}, ok});
        Gateway gw(b, fast_retry());
        CHECK(gw.complete(simple_request()).attempt_count == 3);
    }
    SUBCASE("4xx fails at once") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{400, "bad"}, ok});
        Gateway gw(b, fast_retry());
        try {
            gw.complete(simple_request());
            FAIL("expected HttpStatusError");
        } catch (const HttpStatusError& e) {
            CHECK(e.status() == 400);
            CHECK(e.attempts() == 1);
        }
        CHECK(b->sends_ == 1);
    }
    SUBCASE("exhausted retries") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{500, ""}});
        Gateway gw(b, fast_retry());
        try {
            gw.complete(simple_request());
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.attempts() == 4);
        }
        CHECK(b->sends_ == 4);
    }
    SUBCASE("timeouts are not retried") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{-2, ""}, ok});
        Gateway gw(b, fast_retry());
        CHECK_THROWS_AS(gw.complete(simple_request()), TimeoutError);
        CHECK(b->sends_ == 1);
    }
    SUBCASE("non-json body") {
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{200, "<html/>"}});
        Gateway gw(b, fast_retry());
        CHECK_THROWS_AS(gw.complete(simple_request()), ProtocolError);
        CHECK(b->sends_ == 1);
    }
    SUBCASE("zero retries") {
        auto cfg = fast_retry();
        cfg.retry.max_retries = 0;
        auto b = std::make_shared<ScriptedBackend>(std::vector<RawReply>{{502, ""}, ok});
        Gateway gw(b, cfg);
        CHECK_THROWS_AS(gw.complete(simple_request()), TransportError);
        CHECK(b->sends_ == 1);
    }
}

TEST_CASE("mock backend") {
    auto mock = std::make_shared<MockBackend>();
    Gateway gw(mock);
    const auto req = gw.make_request(TemplateName::extraction, {{"review", "The food was great."}});
    CHECK_THROWS_AS(gw.complete(req), MockMiss);

    mock->add(TemplateName::extraction, sha256_hex(req.user_content()), "NONE");
    const auto r = gw.complete(req);
    CHECK(r.content == "NONE");
    CHECK(r.attempt_count == 1);
    CHECK(mock->call_count() == 2);
    CHECK(mock->calls()[1].template_name == TemplateName::extraction);

    // same content under another template is a different key
    auto other = req;
    other.template_name = TemplateName::category_assignment;
    CHECK_THROWS_AS(gw.complete(other), MockMiss);
    mock->set_default("fallback");
    CHECK(gw.complete(other).content == "fallback");

    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mock fixtures") {
    const auto line1 = MockBackend::fixture_line(TemplateName::extraction, "u1", "Add parking.");
    const auto line2 = MockBackend::fixture_line(TemplateName::clustering_pairwise, "u2", "SAME_THEME");
    const auto parsed = nlohmann::json::parse(line1);
    CHECK(parsed["match"]["template_name"] == "extraction");
    CHECK(parsed["match"]["user_sha256"] == sha256_hex("u1"));
    CHECK(parsed["response"] == "Add parking.");

    MockBackend mock;
    mock.load_fixtures(line1 + "\n\n" + line2 + "\n");
    CHECK(mock.fixture_count() == 2);
    LlmRequest r = simple_request();
    r.messages.back().content = "u2";
    r.template_name = TemplateName::clustering_pairwise;
    CHECK(parse_completion(mock.send(r).body).content == "SAME_THEME");

    CHECK_THROWS_WITH_AS(mock.load_fixtures("{}\n", "fx.jsonl"), doctest::Contains("fx.jsonl:1"), DataError);
    CHECK_THROWS_WITH_AS(mock.load_fixtures(line1 + "\nnot json\n", "fx.jsonl"), doctest::Contains("fx.jsonl:2"),
                         DataError);
    CHECK_THROWS_AS(mock.load_fixture_file("/nonexistent/fixtures.jsonl"), DataError);
}

namespace {

class SlowBackend : public Backend {
public:
    RawReply send(const LlmRequest&) override {
        const int now = ++in_flight;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        --in_flight;
        return {200, completion_body("ok")};
    }
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
};

}  // namespace

TEST_CASE("concurrency bound") {
    auto b = std::make_shared<SlowBackend>();
    GatewayConfig cfg;
    cfg.concurrency = 3;
    Gateway gw(b, cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) threads.emplace_back([&] { gw.complete(simple_request()); });
    for (auto& t : threads) t.join();
    CHECK(b->peak.load() <= 3);
    CHECK(b->peak.load() >= 2);
    CHECK(gw.request_count() == 12);
}

TEST_CASE("http backend") {
    CHECK_THROWS_AS(HttpBackend("https://example.com"), ConfigError);
    CHECK_THROWS_AS(HttpBackend("localhost:11434"), ConfigError);
    CHECK_THROWS_AS(HttpBackend("http://"), ConfigError);

    httplib::Server server;
    std::string seen_path, seen_body;
    server.Post(R"(/.*)", [&](const httplib::Request& req, httplib::Response& res) {
        seen_path = req.path;
        seen_body = req.body;
        if (req.path.find("slow") != std::string::npos) std::this_thread::sleep_for(std::chrono::milliseconds(800));
        if (req.path.find("busy") != std::string::npos) {
            res.status = 503;
            return;
        }
        res.set_content(completion_body("Add parking."), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    SUBCASE("wire format") {
        Gateway gw(std::make_shared<HttpBackend>(base + "/"));
        const auto r = gw.ask(TemplateName::extraction, {{"review", "Please add parking."}});
        CHECK(r.content == "Add parking.");
        CHECK(seen_path == "/v1/chat/completions");
        const auto j = nlohmann::json::parse(seen_body);
        CHECK(j["model"] == "gemma3:27b");
        CHECK(j["stream"] == false);
        CHECK(j["messages"].back()["content"].get<std::string>().find("Please add parking.") != std::string::npos);
    }
    SUBCASE("path prefix") {
        HttpBackend b(base + "/proxy");
        CHECK(b.send(simple_request()).status == 200);
        CHECK(seen_path == "/proxy/v1/chat/completions");
    }
    SUBCASE("5xx surfaces after retries") {
        Gateway gw(std::make_shared<HttpBackend>(base + "/busy"), fast_retry());
        CHECK_THROWS_AS(gw.complete(simple_request()), TransportError);
        CHECK(gw.attempt_count() == 4);
    }
    SUBCASE("read timeout") {
        HttpBackend b(base + "/slow");
        auto r = simple_request();
        r.timeout = Millis{200};
        CHECK_THROWS_AS(b.send(r), TimeoutError);
    }

    server.stop();
    th.join();
}

TEST_CASE("unreachable endpoint") {
    auto cfg = fast_retry();
    cfg.retry.max_retries = 1;
    Gateway gw(std::make_shared<HttpBackend>("http://127.0.0.1:1"), cfg);
    try {
        gw.complete(simple_request());
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 2);
    }
}
