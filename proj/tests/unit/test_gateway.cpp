// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "trajaudit/gateway/roles.hpp"
#include "trajaudit/scriptenv/session.hpp"

using namespace trajaudit;
using namespace trajaudit::gateway;
using namespace std::chrono_literals;

namespace {

const std::string kRecording = std::string(TRAJAUDIT_FIXTURE_DIR) + "/recordings/clean_plate.jsonl";

const scriptenv::TaskRegistry& registry() {
  static const scriptenv::TaskRegistry r = scriptenv::TaskRegistry::builtin();
  return r;
}

GatewayConfig replay_config() {
  GatewayConfig c;
  c.mode = GatewayMode::Replay;
  c.recording_path = kRecording;
  return c;
}

std::string completion_body(const std::string& text) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})}}.dump();
}

// Local chat-completions stub on an ephemeral loopback port.
class StubServer {
public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler h) {
    server_.Post("/v1/chat/completions", [this, h](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      h(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  GatewayConfig live_config() const {
    GatewayConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.model_name = "stub-model";
    c.mode = GatewayMode::Live;
    c.max_retries = 2;
    c.backoff_base = 1ms;
    c.timeout = 5s;
    return c;
  }

  std::atomic<int> hits{0};

private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string temp_path(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("trajaudit_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove(p);
  return p.string();
}

} // namespace

TEST(GatewayReplay, ContinuationNavigatesToCabinetAndFinishes) {
  ChatGateway gw(replay_config());
  GatewayGenerator gen(gw);
  const synth::PerturbedPrefix prefix = scriptenv::redundant_cleaning_prefix(registry());
  const synth::Completion c = synth::complete_trajectory(prefix, gen);
  ASSERT_TRUE(std::holds_alternative<Trajectory>(c));
  const Trajectory& t = std::get<Trajectory>(c);
  ASSERT_EQ(t.size(), 16u);
  EXPECT_EQ(t.steps[9].action.raw, "PickUp(Plate)");
  EXPECT_EQ(t.steps[12].action.raw, "Put(Plate, Cabinet)");
  EXPECT_EQ(t.steps[15].action.raw, "Done()");
  EXPECT_EQ(t.steps[15].observation, "Task Completed.");
  // The recorded continuation is consistent with the environment.
  const scriptenv::Replay r = scriptenv::replay(registry().get("clean-plate"), scriptenv::actions_of(t));
  EXPECT_TRUE(r.states.back().completed_goal);
}

TEST(GatewayReplay, ByteIdenticalAndDigestKeyed) {
  const auto recorded = load_recording(kRecording);
  ChatGateway gw(replay_config());
  const ChatRequest req = continuation_request(scriptenv::redundant_cleaning_prefix(registry()));
  const std::string a = gw.complete(req);
  EXPECT_EQ(a, recorded.at(request_digest(req)).response);
  EXPECT_EQ(a, gw.complete(req));

  ChatRequest other = req;
  other.temperature = 0.1;
  try {
    gw.complete(other);
    FAIL() << "expected MissingRecording";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::MissingRecording);
  }
}

TEST(GatewayReplay, RemoteVerifyParsesRecordedAnswers) {
  ChatGateway gw(replay_config());
  const auto tpl = verifier::default_template();
  const Dataset redundant = load_dataset(std::string(TRAJAUDIT_FIXTURE_DIR) + "/clean_plate_redundant_cleaning.jsonl");
  const DiagnosticReport missed = remote_verify(redundant.items()[0].trajectory, gw, tpl);
  EXPECT_EQ(missed.verdict, Verdict::Normal);
  EXPECT_EQ(missed.parse_mode, ParseMode::Lenient);
  EXPECT_NE(missed.raw_output.find("cleaned the plate successfully"), std::string::npos);

  RemoteVerifier verifier(gw, tpl);
  const Dataset golden = load_dataset(std::string(TRAJAUDIT_FIXTURE_DIR) + "/clean_plate_golden.jsonl");
  const DiagnosticReport ok = verifier.audit(golden.items()[0].trajectory);
  EXPECT_EQ(ok.verdict, Verdict::Normal);
  EXPECT_EQ(ok.parse_mode, ParseMode::Strict);
}

TEST(GatewayReplay, NeverNeedsAnEndpoint) {
  GatewayConfig c = replay_config();
  c.base_url = "http://192.0.2.1:9/v1";  // TEST-NET address, never contacted
  c.timeout = 1ms;
  ChatGateway gw(c);
  EXPECT_NO_THROW(gw.complete(continuation_request(scriptenv::redundant_cleaning_prefix(registry()))));
}

TEST(GatewayConfigTest, Validation) {
  GatewayConfig c = replay_config();
  c.max_retries = -1;
  EXPECT_THROW(ChatGateway{c}, GatewayError);
  c = replay_config();
  c.concurrency_budget = 0;
  EXPECT_THROW(ChatGateway{c}, GatewayError);
  c = replay_config();
  c.recording_path.clear();
  EXPECT_THROW(ChatGateway{c}, GatewayError);
  c = replay_config();
  c.recording_path = "/nonexistent/recording.jsonl";
  EXPECT_THROW(ChatGateway{c}, GatewayError);
  GatewayConfig live;
  live.mode = GatewayMode::Live;
  EXPECT_THROW(ChatGateway{live}, GatewayError);
}

TEST(GatewayLive, ServerErrorsExhaustRetries) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  ChatGateway gw(stub.live_config());
  std::vector<std::chrono::milliseconds> delays;
  gw.set_sleeper([&](std::chrono::milliseconds d) { delays.push_back(d); });
  try {
    gw.complete({{{"user", "hi"}}});
    FAIL() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::Transport);
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(stub.hits.load(), 3);
  ASSERT_EQ(delays.size(), 2u);
  EXPECT_EQ(delays[0], 1ms);
  EXPECT_EQ(delays[1], 2ms);
}

TEST(GatewayLive, RateLimitAndRecovery) {
  StubServer limited([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  ChatGateway gw(limited.live_config());
  gw.set_sleeper([](std::chrono::milliseconds) {});
  try {
    gw.complete({{{"user", "hi"}}});
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::RateLimited);
  }

  StubServer flaky([&](const httplib::Request&, httplib::Response& res) {
    static std::atomic<int> n{0};
    if (n++ == 0) {
      res.status = 503;
    } else {
      res.set_content(completion_body("fine"), "application/json");
    }
  });
  ChatGateway gw2(flaky.live_config());
  const ChatExchange e = gw2.exchange({{{"user", "hi"}}});
  EXPECT_EQ(e.response, "fine");
  EXPECT_EQ(e.attempt_count, 2);
}

TEST(GatewayLive, ClientErrorsAreNotRetried) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  ChatGateway gw(stub.live_config());
  EXPECT_THROW(gw.complete({{{"user", "hi"}}}), GatewayError);
  EXPECT_EQ(stub.hits.load(), 1);
}

TEST(GatewayLive, UnreachableEndpoint) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  GatewayConfig c;
  c.mode = GatewayMode::Live;
  c.base_url = "http://127.0.0.1:" + std::to_string(port);
  c.max_retries = 1;
  c.timeout = 500ms;
  ChatGateway gw(c);
  gw.set_sleeper([](std::chrono::milliseconds) {});
  try {
    remote_verify(scriptenv::golden_run(registry(), "clean-plate"), gw, verifier::default_template());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::Transport);
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(GatewayLive, SendsModelAndBearerToken) {
  std::string auth, model;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    model = json::parse(req.body).value("model", "");
    res.set_content(completion_body("ok"), "application/json");
  });
  GatewayConfig c = stub.live_config();
  c.auth_token_env_var = "TRAJAUDIT_TEST_GATEWAY_TOKEN";
  ::setenv("TRAJAUDIT_TEST_GATEWAY_TOKEN", "secret-123", 1);
  ChatGateway gw(c);
  EXPECT_EQ(gw.complete({{{"user", "hi"}}}), "ok");
  ::unsetenv("TRAJAUDIT_TEST_GATEWAY_TOKEN");
  EXPECT_EQ(auth, "Bearer secret-123");
  EXPECT_EQ(model, "stub-model");
}

TEST(GatewayLive, ConcurrencyBudgetBoundsInFlightRequests) {
  std::atomic<int> in_flight{0}, peak{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(40ms);
    --in_flight;
    res.set_content(completion_body("ok"), "application/json");
  });
  GatewayConfig c = stub.live_config();
  c.concurrency_budget = 2;
  ChatGateway gw(c);
  std::vector<std::thread> callers;
  for (int i = 0; i < 6; ++i) callers.emplace_back([&] { gw.complete({{{"user", "hi"}}}); });
  for (auto& t : callers) t.join();
  EXPECT_EQ(stub.hits.load(), 6);
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(GatewayRecord, RecordThenReplay) {
  StubServer stub([](const httplib::Request& req, httplib::Response& res) {
    res.set_content(completion_body("echo:" + json::parse(req.body)["messages"][0]["content"].get<std::string>()),
                    "application/json");
  });
  const std::string path = temp_path("record");
  GatewayConfig rc = stub.live_config();
  rc.mode = GatewayMode::Record;
  rc.recording_path = path;
  {
    ChatGateway rec(rc);
    EXPECT_EQ(rec.complete({{{"user", "one"}}}), "echo:one");
    EXPECT_EQ(rec.complete({{{"user", "two"}}}), "echo:two");
  }
  GatewayConfig pc;
  pc.recording_path = path;
  ChatGateway replay(pc);
  EXPECT_EQ(replay.complete({{{"user", "two"}}}), "echo:two");
  EXPECT_EQ(replay.complete({{{"user", "one"}}}), "echo:one");
  EXPECT_EQ(stub.hits.load(), 2);
  std::filesystem::remove(path);
}

TEST(ParseContinuation, Shapes) {
  const auto phrases = synth::default_refusal_phrases();
  const auto arr = parse_continuation(R"j([{"thought":"t","action":"Look()","observation":"o"}])j", phrases);
  ASSERT_TRUE(std::holds_alternative<std::vector<synth::StepDraft>>(arr));
  const auto wrapped = parse_continuation("Sure!\n{\"steps\":[{\"action\":\"Done()\"}]}\nGood luck.", phrases);
  ASSERT_TRUE(std::holds_alternative<std::vector<synth::StepDraft>>(wrapped));
  EXPECT_EQ(std::get<std::vector<synth::StepDraft>>(wrapped)[0].action, "Done()");

  const auto refusal = parse_continuation("I'm sorry, but I can't continue this trajectory.", phrases);
  ASSERT_TRUE(std::holds_alternative<synth::GenerationFailure>(refusal));
  EXPECT_EQ(std::get<synth::GenerationFailure>(refusal).kind, synth::GenerationFailure::Kind::Refusal);
  for (const std::string bad : {"no json here", "{\"steps\": []}", "[{\"thought\":\"x\"}]"}) {
    const auto r = parse_continuation(bad, phrases);
    ASSERT_TRUE(std::holds_alternative<synth::GenerationFailure>(r)) << bad;
    EXPECT_EQ(std::get<synth::GenerationFailure>(r).kind, synth::GenerationFailure::Kind::ParseFailure) << bad;
  }
}
