#include "hpcaas/job_service.hpp"

#include "hpcaas/error.hpp"
#include "hpcaas/rankmsg/launcher.hpp"

using nlohmann::json;

namespace hpcaas {

namespace {

constexpr std::string_view kJobKind = "job";

// Exit code recorded when a job fails without a process exit status of its
// own (transport error, gateway restart, bad manifest).
constexpr int kNoExitStatus = -1;

json optional_time(const std::optional<TimePoint>& t) {
  return t ? json(format_utc(*t)) : json(nullptr);
}

std::optional<TimePoint> read_optional_time(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return parse_utc(doc[key].get<std::string>());
}

JobStatus parse_status(std::string_view text) {
  if (text == "queued") return JobStatus::Queued;
  if (text == "running") return JobStatus::Running;
  if (text == "completed") return JobStatus::Completed;
  if (text == "failed") return JobStatus::Failed;
  fail(ErrorCode::Integrity, "unknown job status '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::Local ? "local" : "remote";
}

Backend parse_backend(std::string_view text) {
  if (text == "local") return Backend::Local;
  if (text == "remote") return Backend::RemoteCluster;
  fail(ErrorCode::Validation, "backend must be \"local\" or \"remote\"");
}

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Completed: return "completed";
    case JobStatus::Failed: return "failed";
  }
  return "failed";
}

json job_to_json(const Job& job, bool with_output) {
  json doc = {{"id", job.id},
              {"file_pointer", job.file_pointer},
              {"owner_user_id", job.owner_user_id},
              {"num_processes", job.num_processes},
              {"backend", to_string(job.backend)},
              {"status", to_string(job.status)},
              {"submitted_at", format_utc(job.submitted_at)},
              {"started_at", optional_time(job.started_at)},
              {"finished_at", optional_time(job.finished_at)},
              {"exit_code", job.exit_code ? json(*job.exit_code) : json(nullptr)},
              {"elapsed_ms", job.elapsed_ms ? json(*job.elapsed_ms) : json(nullptr)},
              {"error", job.error},
              {"output_truncated", job.output_truncated}};
  if (with_output) doc["output"] = job.output;
  return doc;
}

Job job_from_json(const json& doc) {
  Job job;
  try {
    job.id = doc.at("id").get<JobId>();
    job.file_pointer = doc.at("file_pointer").get<FilePointer>();
    job.owner_user_id = doc.at("owner_user_id").get<UserId>();
    job.num_processes = doc.at("num_processes").get<std::uint32_t>();
    job.backend = parse_backend(doc.at("backend").get<std::string>());
    job.status = parse_status(doc.at("status").get<std::string>());
    job.submitted_at = parse_utc(doc.at("submitted_at").get<std::string>());
    job.started_at = read_optional_time(doc, "started_at");
    job.finished_at = read_optional_time(doc, "finished_at");
    if (!doc.at("exit_code").is_null()) job.exit_code = doc["exit_code"].get<int>();
    if (!doc.at("elapsed_ms").is_null()) job.elapsed_ms = doc["elapsed_ms"].get<double>();
    job.error = doc.value("error", "");
    job.output = doc.value("output", "");
    job.output_truncated = doc.value("output_truncated", false);
  } catch (const json::exception& e) {
    fail(ErrorCode::Integrity, std::string("malformed job record: ") + e.what());
  }
  return job;
}

void LocalRunner::admit(const ProgramFile&, const std::filesystem::path& program_path) {
  JobManifest::parse(read_file(program_path));
}

RunOutcome LocalRunner::run(const RunRequest& request) {
  const JobManifest manifest = JobManifest::parse(read_file(request.program_path));
  rankmsg::LaunchRequest launch;
  launch.num_processes = request.job.num_processes;
  launch.workload_id = manifest.workload;
  launch.params_json = manifest.params.dump();
  launch.worker_exe = worker_exe_;
  launch.timeout = request.timeout;
  launch.grace = grace_;
  launch.on_line = request.on_line;
  const auto result = rankmsg::launch_local(launch);
  return {result.exit_code, result.timed_out};
}

RemoteRunner::RemoteRunner(std::shared_ptr<NodeTransport> transport,
                           std::function<std::vector<NodeRecord>()> nodes,
                           std::string launcher_template, std::string remote_dir)
    : transport_(std::move(transport)),
      nodes_(std::move(nodes)),
      template_(std::move(launcher_template)),
      remote_dir_(std::move(remote_dir)) {
  if (!transport_) fail(ErrorCode::Usage, "remote backend needs a transport");
}

RunOutcome RemoteRunner::run(const RunRequest& request) {
  const CommandPlan plan = plan_commands(request.file, request.program_path, nodes_(),
                                         request.job.num_processes, template_, remote_dir_);
  try {
    return {execute_plan(plan, *transport_, request.on_line, request.timeout), false};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Timeout) return {124, true};
    throw;
  }
}

JobService::JobService(RecordStore& store, const AuthService& auth, const FileModule& files,
                       JobServiceConfig config,
                       std::map<Backend, std::shared_ptr<JobRunner>> runners, Clock clock)
    : store_(store), auth_(auth), files_(files), config_(config), clock_(std::move(clock)) {
  for (auto& [backend, runner] : runners) {
    if (runner) lanes_[backend].runner = std::move(runner);
  }
  for (const auto& [record_id, bytes] : store_.list_records(kJobKind)) {
    Job job = job_from_json(json::parse(bytes));
    job.id = record_id;
    if (job.status == JobStatus::Running ||
        (job.status == JobStatus::Queued && !lanes_.count(job.backend))) {
      job.status = JobStatus::Failed;
      job.error = job.started_at ? "interrupted" : "backend not configured";
      job.exit_code = kNoExitStatus;
      job.finished_at = clock_();
      job.output += "[gateway] job " + job.error + "\n";
      persist(job);
    } else if (job.status == JobStatus::Queued) {
      lanes_[job.backend].queue.push_back(job.id);
    }
    jobs_.emplace(job.id, std::move(job));
  }
  for (auto& [backend, lane] : lanes_) {
    lane.thread = std::thread([this, b = backend] { executor(b); });
  }
}

JobService::~JobService() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
  for (auto& [backend, lane] : lanes_) {
    if (lane.thread.joinable()) lane.thread.join();
  }
}

void JobService::persist(const Job& job) {
  store_.update_record(kJobKind, job.id, job_to_json(job, true).dump());
}

Job JobService::submit_job(const std::string& token, FilePointer pointer,
                           std::uint32_t num_processes, Backend backend) {
  const Principal who = auth_.authorize(token, Capability::ExecuteJobs);
  if (num_processes < 1 || num_processes > config_.max_processes) {
    fail(ErrorCode::Validation,
         "num_processes must be between 1 and " + std::to_string(config_.max_processes));
  }
  const auto file = files_.find(pointer);
  if (!file) fail(ErrorCode::NotFound, "no file with pointer " + std::to_string(pointer));
  if (file->owner_user_id != who.user_id) {
    fail(ErrorCode::Forbidden, "only the owner of a file may execute it");
  }
  std::shared_ptr<JobRunner> runner;
  {
    std::lock_guard lock(mutex_);
    const auto lane = lanes_.find(backend);
    if (lane == lanes_.end()) {
      fail(ErrorCode::Validation,
           "backend \"" + std::string(to_string(backend)) + "\" is not configured");
    }
    runner = lane->second.runner;
  }
  const auto [path, resolved] = files_.resolve(pointer);
  runner->admit(resolved, path);

  Job job;
  job.file_pointer = pointer;
  job.owner_user_id = who.user_id;
  job.num_processes = num_processes;
  job.backend = backend;
  job.submitted_at = clock_();
  {
    std::lock_guard lock(mutex_);
    job.id = store_.put_record(kJobKind, job_to_json(job, true).dump());
    persist(job);  // the stored copy carries its own id
    jobs_.emplace(job.id, job);
    lanes_[backend].queue.push_back(job.id);
  }
  changed_.notify_all();
  return job;
}

Job JobService::visible_job(const std::string& token, JobId id) const {
  const Principal who = auth_.authorize(token, Capability::ExecuteJobs);
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) fail(ErrorCode::NotFound, "no job " + std::to_string(id));
  if (it->second.owner_user_id != who.user_id && !who.is_admin()) {
    fail(ErrorCode::Forbidden, "job " + std::to_string(id) + " belongs to another user");
  }
  return it->second;
}

Job JobService::job_status(const std::string& token, JobId id) const {
  return visible_job(token, id);
}

std::string JobService::job_output(const std::string& token, JobId id) const {
  return visible_job(token, id).output;
}

std::vector<Job> JobService::list_jobs(const std::string& token) const {
  const Principal who = auth_.authorize(token, Capability::ExecuteJobs);
  std::lock_guard lock(mutex_);
  std::vector<Job> out;
  for (const auto& [id, job] : jobs_) {
    if (job.owner_user_id == who.user_id) out.push_back(job);
  }
  return out;
}

void JobService::wait_idle() {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [&] {
    for (const auto& [backend, lane] : lanes_) {
      if (lane.busy || !lane.queue.empty()) return false;
    }
    return true;
  });
}

std::optional<Job> JobService::wait_for(JobId id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const bool done = changed_.wait_for(lock, timeout, [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.finished();
  });
  const auto it = jobs_.find(id);
  if (!done || it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobService::executor(Backend backend) {
  for (;;) {
    JobId id = 0;
    {
      std::unique_lock lock(mutex_);
      Lane& lane = lanes_.at(backend);
      changed_.wait(lock, [&] { return stopping_ || !lane.queue.empty(); });
      if (stopping_) return;
      id = lane.queue.front();
      lane.queue.pop_front();
      lane.busy = true;
    }
    run_one(backend, id);
    {
      std::lock_guard lock(mutex_);
      lanes_.at(backend).busy = false;
    }
    changed_.notify_all();
  }
}

void JobService::append_line(JobId id, std::string_view line) {
  std::lock_guard lock(mutex_);
  Job& job = jobs_.at(id);
  if (job.output_truncated) return;
  const std::size_t room = config_.output_cap - std::min(config_.output_cap, job.output.size());
  if (line.size() + 1 <= room) {
    job.output.append(line);
    job.output += '\n';
    return;
  }
  job.output.append(line.substr(0, room));
  job.output += "\n[output truncated at " + std::to_string(config_.output_cap) + " bytes]\n";
  job.output_truncated = true;
}

void JobService::finish(JobId id, JobStatus status, std::optional<int> exit_code,
                        std::string error, double elapsed_ms) {
  {
    std::lock_guard lock(mutex_);
    Job& job = jobs_.at(id);
    job.status = status;
    job.exit_code = exit_code;
    job.error = std::move(error);
    job.elapsed_ms = elapsed_ms;
    job.finished_at = clock_();
    if (!job.error.empty()) job.output += "[gateway] " + job.error + "\n";
    persist(job);
  }
  changed_.notify_all();
}

void JobService::run_one(Backend backend, JobId id) {
  Job snapshot;
  std::shared_ptr<JobRunner> runner;
  {
    std::lock_guard lock(mutex_);
    Job& job = jobs_.at(id);
    job.status = JobStatus::Running;
    job.started_at = clock_();
    persist(job);
    snapshot = job;
    runner = lanes_.at(backend).runner;
  }
  changed_.notify_all();

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };
  try {
    const auto [path, file] = files_.resolve(snapshot.file_pointer);
    const RunRequest request{snapshot, path, file,
                             [this, id](std::string_view line) { append_line(id, line); },
                             config_.run_timeout};
    const RunOutcome outcome = runner->run(request);
    if (outcome.timed_out) {
      finish(id, JobStatus::Failed, outcome.exit_code, "timeout", elapsed());
    } else if (outcome.exit_code == 0) {
      finish(id, JobStatus::Completed, 0, "", elapsed());
    } else {
      finish(id, JobStatus::Failed, outcome.exit_code,
             "exit code " + std::to_string(outcome.exit_code), elapsed());
    }
  } catch (const std::exception& e) {
    finish(id, JobStatus::Failed, kNoExitStatus, e.what(), elapsed());
  }
}

}  // namespace hpcaas
