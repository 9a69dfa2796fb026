#include "archevo/llm_gateway.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

namespace archevo {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

GatewayError::GatewayError(Kind kind, const std::string& what, std::optional<int> status,
                           std::optional<double> retry_after_s)
    : Error(what), kind_(kind), status_(status), retry_after_s_(retry_after_s) {}

TranscriptLog::TranscriptLog(std::filesystem::path file) : file_(std::move(file)) {
  if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
}

std::string TranscriptLog::to_json_line(const ChatExchange& e) {
  ordered_json j;
  j["stream"] = e.stream;
  j["seq"] = e.seq;
  j["system"] = e.system ? ordered_json(*e.system) : ordered_json();
  j["user"] = e.user;
  j["response"] = e.response;
  j["latency_ms"] = e.latency_ms;
  if (e.token_counts) {
    j["prompt_tokens"] = e.token_counts->first;
    j["completion_tokens"] = e.token_counts->second;
  }
  return j.dump();
}

void TranscriptLog::append(const ChatExchange& exchange) {
  std::lock_guard lock(mu_);
  exchanges_.push_back(exchange);
  if (file_) {
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to transcript '" + file_->string() + "'");
    out << to_json_line(exchange) << '\n';
  }
}

std::vector<ChatExchange> TranscriptLog::exchanges() const {
  std::lock_guard lock(mu_);
  return exchanges_;
}

std::size_t TranscriptLog::size() const {
  std::lock_guard lock(mu_);
  return exchanges_.size();
}

std::uint64_t ChatGateway::next_seq(const std::string& stream) {
  std::lock_guard lock(seq_mu_);
  return seqs_[stream]++;
}

std::string ChatGateway::complete(const ChatRequest& request) {
  if (request.user.empty()) throw Error("chat request has an empty user message");
  const std::uint64_t seq = next_seq(request.stream);
  const auto start = std::chrono::steady_clock::now();
  Reply reply = do_complete(request, seq);
  const auto stop = std::chrono::steady_clock::now();
  if (transcript_) {
    ChatExchange ex;
    ex.stream = request.stream;
    ex.seq = seq;
    ex.system = request.system;
    ex.user = request.user;
    ex.response = reply.text;
    ex.latency_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    ex.token_counts = reply.token_counts;
    transcript_->append(ex);
  }
  return std::move(reply.text);
}

void ScriptedGateway::add(std::string stream, std::uint64_t seq, std::string response) {
  std::lock_guard lock(mu_);
  script_[{std::move(stream), seq}] = std::move(response);
}

void ScriptedGateway::push(const std::string& stream, std::string response) {
  std::lock_guard lock(mu_);
  const std::uint64_t seq = push_counts_[stream]++;
  script_[{stream, seq}] = std::move(response);
}

void ScriptedGateway::load_jsonl_text(std::string_view text) {
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      json j = json::parse(lines[i]);
      add(j.at("stream").get<std::string>(), j.at("seq").get<std::uint64_t>(),
          j.at("response").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("script fixture: ") + e.what(), i + 1, 1);
    }
  }
}

void ScriptedGateway::load_jsonl(const std::filesystem::path& path) {
  load_jsonl_text(read_text_file(path));
}

std::size_t ScriptedGateway::size() const {
  std::lock_guard lock(mu_);
  return script_.size();
}

ChatGateway::Reply ScriptedGateway::do_complete(const ChatRequest& request, std::uint64_t seq) {
  {
    std::lock_guard lock(mu_);
    auto it = script_.find({request.stream, seq});
    if (it != script_.end()) return Reply{it->second, std::nullopt};
  }
  if (fallback_) return Reply{fallback_(request, seq), std::nullopt};
  throw GatewayError(GatewayError::Kind::script_exhausted,
                     "script has no response for stream '" + request.stream + "' seq " +
                         std::to_string(seq));
}

HttpGateway::HttpGateway(HttpGatewayConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error("gateway endpoint '" + url + "' must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/chat/completions";
}

std::string HttpGateway::build_request_body(const HttpGatewayConfig& config,
                                            const ChatRequest& request) {
  ordered_json body;
  body["model"] = config.model;
  ordered_json messages = ordered_json::array();
  if (request.system) messages.push_back({{"role", "system"}, {"content", *request.system}});
  messages.push_back({{"role", "user"}, {"content", request.user}});
  body["messages"] = std::move(messages);
  if (config.temperature) body["temperature"] = *config.temperature;
  body["stream"] = false;
  return body.dump();
}

std::string HttpGateway::parse_response_body(
    std::string_view body, std::optional<std::pair<std::int64_t, std::int64_t>>* token_counts) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(GatewayError::Kind::protocol,
                       std::string("chat completion body is not JSON: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (token_counts && j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      *token_counts = std::make_pair(u.value("prompt_tokens", std::int64_t{0}),
                                     u.value("completion_tokens", std::int64_t{0}));
    }
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception& e) {
    throw GatewayError(GatewayError::Kind::protocol,
                       std::string("chat completion body has no message: ") + e.what());
  }
}

namespace {

std::optional<double> parse_retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return std::nullopt;
  try {
    return std::stod(res.get_header_value("Retry-After"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

ChatGateway::Reply HttpGateway::do_complete(const ChatRequest& request, std::uint64_t) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = client.Post(path_, headers, build_request_body(config_, request), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read
                          ? GatewayError::Kind::timeout
                          : GatewayError::Kind::transport;
    throw GatewayError(kind, "chat completion request to " + config_.endpoint +
                                 " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw GatewayError(GatewayError::Kind::status,
                       "chat completion returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 512),
                       res->status, parse_retry_after(*res));
  }
  Reply reply;
  reply.text = parse_response_body(res->body, &reply.token_counts);
  return reply;
}

}  // namespace archevo
