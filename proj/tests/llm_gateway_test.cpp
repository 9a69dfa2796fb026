#include <gtest/gtest.h>

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "archevo/llm_gateway.hpp"
#include "test_support.hpp"

using namespace archevo;
using archevo::testing::TempDir;
using json = nlohmann::json;

TEST(ScriptedGateway, ReplaysByStreamAndSeq) {
  ScriptedGateway llm;
  llm.add("a", 0, "a0");
  llm.add("a", 1, "a1");
  llm.add("b", 0, "b0");
  EXPECT_EQ(llm.complete({"b", std::nullopt, "q"}), "b0");
  EXPECT_EQ(llm.complete({"a", std::nullopt, "q"}), "a0");
  EXPECT_EQ(llm.complete({"a", "sys", "q"}), "a1");
  try {
    llm.complete({"a", std::nullopt, "q"});
    FAIL() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::script_exhausted);
    EXPECT_NE(std::string(e.what()).find("seq 2"), std::string::npos);
  }
}

TEST(ScriptedGateway, FallbackAnswersUnscriptedTurns) {
  ScriptedGateway llm([](const ChatRequest& r, std::uint64_t seq) {
    return r.stream + "#" + std::to_string(seq);
  });
  llm.add("s", 1, "scripted");
  EXPECT_EQ(llm.complete({"s", std::nullopt, "q"}), "s#0");
  EXPECT_EQ(llm.complete({"s", std::nullopt, "q"}), "scripted");
  EXPECT_EQ(llm.complete({"s", std::nullopt, "q"}), "s#2");
}

TEST(ScriptedGateway, RejectsEmptyUserMessage) {
  ScriptedGateway llm;
  EXPECT_THROW(llm.complete({"s", std::nullopt, ""}), Error);
}

TEST(ScriptedGateway, BadScriptLineReportsLine) {
  ScriptedGateway llm;
  try {
    llm.load_jsonl_text("{\"stream\":\"a\",\"seq\":0,\"response\":\"x\"}\n{\"stream\":\"a\"}\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Transcript, ReloadsAsScript) {
  TempDir dir;
  TranscriptLog log(dir / "t.jsonl");
  ScriptedGateway first([](const ChatRequest& r, std::uint64_t seq) {
    return "answer " + r.user + " " + std::to_string(seq);
  });
  first.set_transcript(&log);
  std::vector<std::string> answers;
  for (const char* stream : {"x", "y", "x"}) {
    answers.push_back(first.complete({stream, "system\nprompt", std::string("q-") + stream}));
  }
  EXPECT_EQ(log.size(), 3u);

  const auto lines = split_lines(read_text_file(dir / "t.jsonl"));
  ASSERT_GE(lines.size(), 3u);
  const auto j = json::parse(lines[0]);
  EXPECT_EQ(j.at("stream"), "x");
  EXPECT_EQ(j.at("seq"), 0);
  EXPECT_EQ(j.at("system"), "system\nprompt");
  EXPECT_TRUE(j.contains("latency_ms"));

  ScriptedGateway replay;
  replay.load_jsonl(dir / "t.jsonl");
  EXPECT_EQ(replay.size(), 3u);
  EXPECT_EQ(replay.complete({"x", std::nullopt, "q"}), answers[0]);
  EXPECT_EQ(replay.complete({"y", std::nullopt, "q"}), answers[1]);
  EXPECT_EQ(replay.complete({"x", std::nullopt, "q"}), answers[2]);
}

TEST(HttpGateway, RequestBodyShape) {
  HttpGatewayConfig cfg{"http://h/v1", "m", "", 0.5, 10};
  const auto body = json::parse(HttpGateway::build_request_body(cfg, {"s", "sys", "usr"}));
  EXPECT_EQ(body.at("model"), "m");
  ASSERT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "usr");
  EXPECT_DOUBLE_EQ(body.at("temperature").get<double>(), 0.5);

  cfg.temperature.reset();
  const auto user_only = json::parse(HttpGateway::build_request_body(cfg, {"s", std::nullopt, "u"}));
  EXPECT_EQ(user_only.at("messages").size(), 1u);
  EXPECT_FALSE(user_only.contains("temperature"));
}

TEST(HttpGateway, ResponseBodyParsing) {
  std::optional<std::pair<std::int64_t, std::int64_t>> tokens;
  EXPECT_EQ(HttpGateway::parse_response_body(
                R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})",
                &tokens),
            "hi");
  ASSERT_TRUE(tokens);
  EXPECT_EQ(tokens->first, 3);
  EXPECT_THROW(HttpGateway::parse_response_body("not json"), GatewayError);
  EXPECT_THROW(HttpGateway::parse_response_body(R"({"choices":[]})"), GatewayError);
}

TEST(HttpGateway, LoopbackServer) {
  httplib::Server server;
  std::string seen_auth;
  json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    const std::string user = seen_body["messages"].back()["content"];
    if (user == "busy") {
      res.status = 429;
      res.set_header("Retry-After", "7");
      res.set_content("slow down", "text/plain");
      return;
    }
    json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo " + user}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("ARCHEVO_TEST_KEY", "secret", 1);
  HttpGateway llm({"http://127.0.0.1:" + std::to_string(port) + "/v1/", "demo-model",
                   "ARCHEVO_TEST_KEY", std::nullopt, 5.0});
  TranscriptLog log;
  llm.set_transcript(&log);
  EXPECT_EQ(llm.complete({"s", "sys", "hello"}), "echo hello");
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_body["model"], "demo-model");
  EXPECT_EQ(log.size(), 1u);

  try {
    llm.complete({"s", std::nullopt, "busy"});
    ADD_FAILURE() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayError::Kind::status);
    EXPECT_EQ(e.status(), 429);
    EXPECT_EQ(e.retry_after_seconds(), 7.0);
  }
  server.stop();
  th.join();

  try {
    llm.complete({"s", std::nullopt, "hello"});
    ADD_FAILURE() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_NE(e.kind(), GatewayError::Kind::status);
  }
}

TEST(HttpGateway, RejectsEndpointWithoutScheme) {
  EXPECT_THROW(HttpGateway({"localhost:8000/v1", "m"}), Error);
}
