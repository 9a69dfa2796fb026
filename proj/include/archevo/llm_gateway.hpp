#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "archevo/common.hpp"

namespace archevo {

struct ChatRequest {
  // Conversation stream, one per search slot. Sequence numbers are counted
  // per stream.
  std::string stream;
  std::optional<std::string> system;
  std::string user;
};

struct ChatExchange {
  std::string stream;
  std::uint64_t seq = 0;
  std::optional<std::string> system;
  std::string user;
  std::string response;
  double latency_ms = 0.0;
  std::optional<std::pair<std::int64_t, std::int64_t>> token_counts;
};

class GatewayError : public Error {
 public:
  enum class Kind { transport, status, timeout, script_exhausted, protocol };

  GatewayError(Kind kind, const std::string& what, std::optional<int> status = std::nullopt,
               std::optional<double> retry_after_s = std::nullopt);

  Kind kind() const { return kind_; }
  std::optional<int> status() const { return status_; }
  std::optional<double> retry_after_seconds() const { return retry_after_s_; }

 private:
  Kind kind_;
  std::optional<int> status_;
  std::optional<double> retry_after_s_;
};

// Append-only exchange log. Optionally mirrored to a JSONL file with one
// {stream, seq, system, user, response, latency_ms} record per line.
class TranscriptLog {
 public:
  TranscriptLog() = default;
  explicit TranscriptLog(std::filesystem::path file);

  void append(const ChatExchange& exchange);
  std::vector<ChatExchange> exchanges() const;
  std::size_t size() const;

  static std::string to_json_line(const ChatExchange& exchange);

 private:
  mutable std::mutex mu_;
  std::vector<ChatExchange> exchanges_;
  std::optional<std::filesystem::path> file_;
};

// Chat-completion access. The gateway never retries; callers own retry
// policy. Safe for concurrent use across distinct streams.
class ChatGateway {
 public:
  virtual ~ChatGateway() = default;

  std::string complete(const ChatRequest& request);

  void set_transcript(TranscriptLog* log) { transcript_ = log; }
  TranscriptLog* transcript() const { return transcript_; }

 protected:
  struct Reply {
    std::string text;
    std::optional<std::pair<std::int64_t, std::int64_t>> token_counts;
  };
  virtual Reply do_complete(const ChatRequest& request, std::uint64_t seq) = 0;

 private:
  std::uint64_t next_seq(const std::string& stream);

  std::mutex seq_mu_;
  std::map<std::string, std::uint64_t> seqs_;
  TranscriptLog* transcript_ = nullptr;
};

// Produces a response for (request, seq) when the script has no entry.
using Responder = std::function<std::string(const ChatRequest&, std::uint64_t seq)>;

// Replays responses keyed by (stream, seq). Script fixture lines are
// {stream, seq, response}; a transcript file loads the same way.
class ScriptedGateway : public ChatGateway {
 public:
  ScriptedGateway() = default;
  explicit ScriptedGateway(Responder fallback) : fallback_(std::move(fallback)) {}

  void add(std::string stream, std::uint64_t seq, std::string response);
  // Appends the next response of `stream`.
  void push(const std::string& stream, std::string response);
  void load_jsonl(const std::filesystem::path& path);
  void load_jsonl_text(std::string_view text);
  std::size_t size() const;

 protected:
  Reply do_complete(const ChatRequest& request, std::uint64_t seq) override;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::uint64_t>, std::string> script_;
  std::map<std::string, std::uint64_t> push_counts_;
  Responder fallback_;
};

struct HttpGatewayConfig {
  // Base URL up to the API version, e.g. "http://localhost:8000/v1".
  std::string endpoint;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<double> temperature;
  double timeout_s = 300.0;
};

// OpenAI-compatible chat completions: POST {endpoint}/chat/completions with
// {model, messages, temperature?}; consumes choices[0].message.content.
class HttpGateway : public ChatGateway {
 public:
  explicit HttpGateway(HttpGatewayConfig config);

  static std::string build_request_body(const HttpGatewayConfig& config,
                                        const ChatRequest& request);
  // Throws GatewayError(protocol) when the body lacks a message.
  static std::string parse_response_body(std::string_view body,
                                         std::optional<std::pair<std::int64_t, std::int64_t>>*
                                             token_counts = nullptr);

 protected:
  Reply do_complete(const ChatRequest& request, std::uint64_t seq) override;

 private:
  HttpGatewayConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace archevo
