#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hpcaas/auth.hpp"
#include "hpcaas/execution.hpp"
#include "hpcaas/file_module.hpp"
#include "hpcaas/record_store.hpp"

namespace hpcaas {

using JobId = std::uint64_t;

enum class Backend { Local, RemoteCluster };
enum class JobStatus { Queued, Running, Completed, Failed };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view text);  // "local" | "remote"
std::string_view to_string(JobStatus status);

struct Job {
  JobId id = 0;
  FilePointer file_pointer = 0;
  UserId owner_user_id = 0;
  std::uint32_t num_processes = 1;
  Backend backend = Backend::Local;
  JobStatus status = JobStatus::Queued;
  TimePoint submitted_at;
  std::optional<TimePoint> started_at;
  std::optional<TimePoint> finished_at;
  std::optional<int> exit_code;
  std::optional<double> elapsed_ms;
  std::string error;  // short failure reason, e.g. "timeout"
  std::string output;
  bool output_truncated = false;

  bool finished() const { return status == JobStatus::Completed || status == JobStatus::Failed; }
};

nlohmann::json job_to_json(const Job& job, bool with_output);
Job job_from_json(const nlohmann::json& doc);

struct RunRequest {
  const Job& job;
  std::filesystem::path program_path;
  const ProgramFile& file;
  LineSink on_line;
  std::chrono::milliseconds timeout;
};

struct RunOutcome {
  int exit_code = 0;
  bool timed_out = false;
};

/// A backend executes one job at a time. Errors propagate as exceptions and
/// fail the job with the message appended to its output.
class JobRunner {
 public:
  virtual ~JobRunner() = default;

  /// Rejects jobs this backend could never run (called at submit time).
  virtual void admit(const ProgramFile& file, const std::filesystem::path& program_path) {
    (void)file;
    (void)program_path;
  }

  virtual RunOutcome run(const RunRequest& request) = 0;
};

/// Runs built-in workloads described by an uploaded manifest on the embedded
/// message-passing runtime.
class LocalRunner final : public JobRunner {
 public:
  explicit LocalRunner(std::filesystem::path worker_exe = {},
                       std::chrono::milliseconds grace = std::chrono::seconds(2))
      : worker_exe_(std::move(worker_exe)), grace_(grace) {}

  void admit(const ProgramFile& file, const std::filesystem::path& program_path) override;
  RunOutcome run(const RunRequest& request) override;

 private:
  std::filesystem::path worker_exe_;
  std::chrono::milliseconds grace_;
};

/// Copies the uploaded program to every registered node, then launches it on
/// the master through the configured template.
class RemoteRunner final : public JobRunner {
 public:
  RemoteRunner(std::shared_ptr<NodeTransport> transport,
               std::function<std::vector<NodeRecord>()> nodes,
               std::string launcher_template = std::string(kDefaultRemoteTemplate),
               std::string remote_dir = std::string(kDefaultRemoteDir));

  RunOutcome run(const RunRequest& request) override;

 private:
  std::shared_ptr<NodeTransport> transport_;
  std::function<std::vector<NodeRecord>()> nodes_;
  std::string template_;
  std::string remote_dir_;
};

struct JobServiceConfig {
  std::uint32_t max_processes = 64;
  std::size_t output_cap = 4u << 20;
  std::chrono::milliseconds run_timeout = std::chrono::hours(1);
};

/// Job lifecycle (record kind "job"). Each backend has its own FIFO queue
/// drained by one executor thread, so at most one job per backend runs at a
/// time. On startup, jobs left Running by a previous process are failed as
/// "interrupted" and Queued ones are queued again.
class JobService {
 public:
  JobService(RecordStore& store, const AuthService& auth, const FileModule& files,
             JobServiceConfig config, std::map<Backend, std::shared_ptr<JobRunner>> runners,
             Clock clock = system_clock());
  ~JobService();

  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  /// Only the file's owner may run it; returns the Queued job immediately.
  Job submit_job(const std::string& token, FilePointer pointer, std::uint32_t num_processes,
                 Backend backend);

  /// Owner or admin. The output may be partial while the job runs.
  Job job_status(const std::string& token, JobId id) const;
  std::string job_output(const std::string& token, JobId id) const;

  /// The caller's own jobs, ascending id.
  std::vector<Job> list_jobs(const std::string& token) const;

  /// Blocks until every queue is empty and no job is running.
  void wait_idle();

  /// Blocks until the job is finished or the timeout passes.
  std::optional<Job> wait_for(JobId id, std::chrono::milliseconds timeout);

 private:
  struct Lane {
    std::shared_ptr<JobRunner> runner;
    std::deque<JobId> queue;
    bool busy = false;
    std::thread thread;
  };

  Job visible_job(const std::string& token, JobId id) const;
  void executor(Backend backend);
  void run_one(Backend backend, JobId id);
  void append_line(JobId id, std::string_view line);
  void finish(JobId id, JobStatus status, std::optional<int> exit_code, std::string error,
              double elapsed_ms);
  void persist(const Job& job);

  RecordStore& store_;
  const AuthService& auth_;
  const FileModule& files_;
  JobServiceConfig config_;
  Clock clock_;

  mutable std::mutex mutex_;
  std::condition_variable changed_;
  bool stopping_ = false;
  std::map<JobId, Job> jobs_;
  std::map<Backend, Lane> lanes_;
};

}  // namespace hpcaas
