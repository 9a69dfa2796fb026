#include "archevo/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <nlohmann/json.hpp>

namespace archevo {

using json = nlohmann::json;

namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &sa, nullptr);
    return true;
  }();
  (void)done;
}

}  // namespace

WorkerProcess::WorkerProcess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw EvaluatorError("worker command is empty");
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw EvaluatorError("pipe failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw EvaluatorError("pipe failed");
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) throw EvaluatorError(std::string("fork failed: ") + std::strerror(errno));
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  alive_ = true;
}

WorkerProcess::~WorkerProcess() { shutdown(); }

void WorkerProcess::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin ends a well-behaved worker; give it a moment, then kill.
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      usleep(5000);
    }
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }
  alive_ = false;
}

std::string WorkerProcess::round_trip(const std::string& line, double timeout_s) {
  if (!alive_) throw EvaluatorError("worker is not running");
  std::string out = line;
  out.push_back('\n');
  std::size_t written = 0;
  while (written < out.size()) {
    const ssize_t n = write(to_child_, out.data() + written, out.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      alive_ = false;
      throw EvaluatorError(std::string("worker write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      alive_ = false;
      throw EvaluatorError("worker timeout");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      alive_ = false;
      throw EvaluatorError(std::string("worker poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      alive_ = false;
      throw EvaluatorError(std::string("worker read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      alive_ = false;
      throw EvaluatorError("worker exited");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

struct SandboxEvaluator::Response {
  json body;
};

SandboxEvaluator::SandboxEvaluator(SandboxConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw EvaluatorError("sandbox worker command is empty");
  if (config_.workers == 0) config_.workers = 1;
  try {
    if (!json::parse(config_.worker_config).is_object()) throw EvaluatorError("");
  } catch (const std::exception&) {
    throw EvaluatorError("worker config must be a JSON object");
  }
  argv_ = config_.command;
  argv_.push_back(config_.worker_config);
}

SandboxEvaluator::~SandboxEvaluator() = default;

std::size_t SandboxEvaluator::restarts() const {
  std::lock_guard lock(mu_);
  return restarts_;
}

std::string SandboxEvaluator::encode_request(std::uint64_t id, std::string_view cmd,
                                             const std::string& source,
                                             const std::string& config_json) {
  json j;
  j["id"] = id;
  j["cmd"] = cmd;
  j["source"] = source;
  j["config"] = json::parse(config_json);
  return j.dump();
}

std::unique_ptr<WorkerProcess> SandboxEvaluator::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !idle_.empty() || started_ < config_.workers; });
  if (!idle_.empty()) {
    auto w = std::move(idle_.back());
    idle_.pop_back();
    return w;
  }
  ++started_;
  lock.unlock();
  try {
    return std::make_unique<WorkerProcess>(argv_);
  } catch (...) {
    lock.lock();
    --started_;
    cv_.notify_one();
    throw;
  }
}

void SandboxEvaluator::release(std::unique_ptr<WorkerProcess> worker) {
  std::lock_guard lock(mu_);
  if (worker && worker->alive()) {
    idle_.push_back(std::move(worker));
  } else {
    // Dead worker: free its slot so the next request starts a fresh one.
    --started_;
    ++restarts_;
  }
  cv_.notify_one();
}

SandboxEvaluator::Response SandboxEvaluator::call(std::string_view cmd, const std::string& source) {
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
  }
  const std::string line = encode_request(id, cmd, source, config_.worker_config);
  auto worker = acquire();
  std::string reply;
  try {
    reply = worker->round_trip(line, config_.timeout_s);
  } catch (...) {
    worker.reset();
    release(nullptr);
    throw;
  }
  Response r;
  try {
    r.body = json::parse(reply);
    if (!r.body.is_object() || !r.body.contains("id") || r.body["id"] != id) {
      throw EvaluatorError("worker reply does not echo request id " + std::to_string(id));
    }
  } catch (const std::exception& e) {
    // Out of step with the protocol; this worker cannot be trusted further.
    worker.reset();
    release(nullptr);
    throw EvaluatorError(std::string("bad worker reply: ") + e.what());
  }
  release(std::move(worker));
  return r;
}

CompileCheck SandboxEvaluator::check_compile(const std::string& source) {
  const auto r = call("compile", source);
  if (r.body.value("ok", false)) return CompileCheck{true, {}};
  return CompileCheck{false, r.body.value("error", std::string("compile failed"))};
}

BudgetReport SandboxEvaluator::measure_budgets(const std::string& source) {
  const auto r = call("budget", source);
  if (!r.body.value("ok", false)) {
    throw EvaluatorError("budget measurement failed: " +
                         r.body.value("error", std::string("unknown error")));
  }
  try {
    return BudgetReport{r.body.at("params").get<double>(), r.body.at("flops").get<double>()};
  } catch (const json::exception& e) {
    throw EvaluatorError(std::string("budget reply lacks params/flops: ") + e.what());
  }
}

EvaluationResult SandboxEvaluator::train_eval(const std::string& source) {
  EvaluationResult result;
  try {
    const auto budgets = measure_budgets(source);
    const auto r = call("train", source);
    if (!r.body.value("ok", false)) {
      result.compile_error = r.body.value("error", std::string("training failed"));
      return result;
    }
    result.val_accuracy = r.body.at("val_acc").get<double>();
    if (r.body.contains("test_acc") && r.body["test_acc"].is_number()) {
      result.test_accuracy = r.body["test_acc"].get<double>();
    }
    result.budgets = budgets;
    result.valid = true;
  } catch (const std::exception& e) {
    result = EvaluationResult{};
    result.compile_error = e.what();
  }
  return result;
}

}  // namespace archevo
