#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "archevo/evaluation.hpp"

namespace archevo {

struct SandboxConfig {
  // Program and leading arguments; the worker config JSON is appended as the
  // last argument.
  std::vector<std::string> command;
  // JSON object text, also sent as the `config` field of every request.
  std::string worker_config = "{}";
  std::size_t workers = 1;
  double timeout_s = 600.0;
};

// One child process speaking line-delimited JSON over stdin/stdout.
class WorkerProcess {
 public:
  WorkerProcess(const std::vector<std::string>& argv);
  ~WorkerProcess();
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;

  // Sends one line and waits for one line back. Throws EvaluatorError on
  // EOF, write failure or timeout; the process is then unusable.
  std::string round_trip(const std::string& line, double timeout_s);
  bool alive() const { return alive_; }

 private:
  void shutdown();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool alive_ = false;
};

// Evaluator backed by a pool of worker processes, one request in flight per
// process. A worker that crashes or stalls is replaced and the request that
// hit it fails once with EvaluatorError (train_eval reports it as an invalid
// result instead).
class SandboxEvaluator : public Evaluator {
 public:
  explicit SandboxEvaluator(SandboxConfig config);
  ~SandboxEvaluator() override;

  CompileCheck check_compile(const std::string& source) override;
  BudgetReport measure_budgets(const std::string& source) override;
  EvaluationResult train_eval(const std::string& source) override;

  std::size_t restarts() const;

  // Request line for the wire protocol; exposed for tests.
  static std::string encode_request(std::uint64_t id, std::string_view cmd,
                                    const std::string& source, const std::string& config_json);

 private:
  struct Response;
  Response call(std::string_view cmd, const std::string& source);
  std::unique_ptr<WorkerProcess> acquire();
  void release(std::unique_ptr<WorkerProcess> worker);

  SandboxConfig config_;
  std::vector<std::string> argv_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<WorkerProcess>> idle_;
  std::size_t started_ = 0;
  std::size_t restarts_ = 0;
  std::uint64_t next_id_ = 1;
};

}  // namespace archevo
