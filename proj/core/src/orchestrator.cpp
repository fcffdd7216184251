#include "dnas/orchestrator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/inotify.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "dnas/model.hpp"
#include "json.hpp"

extern char** environ;

namespace dnas::orch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void replace_all(std::string& s, std::string_view token, std::string_view value) {
  for (std::size_t pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size())) {
    s.replace(pos, token.size(), value);
  }
}

std::size_t count_occurrences(std::string_view s, std::string_view token) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(token); pos != std::string_view::npos; pos = s.find(token, pos + token.size())) ++n;
  return n;
}

bool is_slot_line(std::string_view line, std::string& key, std::string& value) {
  const std::string t = trim(line);
  const auto colon = t.find(':');
  if (colon == std::string::npos) return false;
  key = trim(std::string_view(t).substr(0, colon));
  if (key != "GPU_IDs" && key != "NUM_JOBS_PER_GPU" && key != "EPOCH_EVAL_FREQ") return false;
  value = trim(std::string_view(t).substr(colon + 1));
  return true;
}

std::string format_double(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void append_status(const fs::path& log, const std::string& message) {
  std::ofstream out(log, std::ios::app);
  out << message << '\n';
}

}  // namespace

std::size_t JobTemplate::num_jobs() const {
  std::size_t n = 1;
  for (const auto& g : groups) n *= g.items.size();
  return n;
}

JobTemplate parse_config(std::string_view text) {
  JobTemplate t;
  std::vector<std::string> lines = split(text, '\n');
  std::size_t i = 0;
  auto skippable = [](const std::string& l) { return l.empty() || l[0] == '#'; };
  while (i < lines.size() && skippable(lines[i])) ++i;
  if (i == lines.size()) throw ConfigError("config has no command line", 1);
  t.command = lines[i++];

  t.pieces.emplace_back();
  bool have_slots = false, have_jobs = false;
  std::string key, value;
  for (; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (skippable(lines[i])) continue;
    if (is_slot_line(lines[i], key, value)) {
      if (key == "GPU_IDs") {
        t.slots = split(value, ',');
        for (const auto& s : t.slots) {
          if (s.empty()) throw ConfigError("empty slot id in GPU_IDs", line_no);
        }
        have_slots = true;
      } else if (key == "NUM_JOBS_PER_GPU") {
        try {
          std::size_t used = 0;
          const long n = std::stol(value, &used);
          if (used != value.size() || n < 1) throw std::invalid_argument("range");
          t.jobs_per_slot = static_cast<std::size_t>(n);
        } catch (const std::exception&) {
          throw ConfigError("NUM_JOBS_PER_GPU must be a positive integer", line_no);
        }
        have_jobs = true;
      } else {
        for (const auto& f : split(value, ',')) {
          try {
            std::size_t used = 0;
            t.eval_freqs.push_back(std::stod(f, &used));
            if (used != f.size()) throw std::invalid_argument("trailing");
          } catch (const std::exception&) {
            throw ConfigError("EPOCH_EVAL_FREQ entries must be numbers", line_no);
          }
        }
      }
      continue;
    }
    if (have_slots || have_jobs) throw ConfigError("argument text after the slot lines", line_no);
    const std::string& line = lines[i];
    if (!t.pieces.back().empty() || !t.groups.empty()) t.pieces.back() += ' ';
    std::string group_text;
    bool in_group = false;
    for (char c : line) {
      if (c == '{') {
        if (in_group) throw ConfigError("nested '{'", line_no);
        in_group = true;
        group_text.clear();
      } else if (c == '}') {
        if (!in_group) throw ConfigError("unbalanced '}'", line_no);
        in_group = false;
        BraceGroup g{split(group_text, ',')};
        if (g.items.size() == 1 && g.items[0].empty()) throw ConfigError("empty brace group", line_no);
        t.groups.push_back(std::move(g));
        t.pieces.emplace_back();
      } else if (in_group) {
        group_text += c;
      } else {
        t.pieces.back() += c;
      }
    }
    if (in_group) throw ConfigError("unbalanced '{'", line_no);
  }
  const std::size_t end_line = lines.size();
  if (!have_slots) throw ConfigError("missing GPU_IDs line", end_line);
  if (!have_jobs) throw ConfigError("missing NUM_JOBS_PER_GPU line", end_line);
  return t;
}

JobTemplate parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string JobSpec::command_for_slot(const std::string& slot) const {
  std::string c = command;
  replace_all(c, kSlotToken, slot);
  replace_all(c, kSlotTokenAlt, slot);
  return c;
}

fs::path metrics_path(const fs::path& prefix) { return prefix.string() + ".metrics.jsonl"; }
fs::path checkpoint_path(const fs::path& prefix) { return prefix.string() + ".ckpt.json"; }
fs::path descriptor_path(const fs::path& prefix, std::size_t k) {
  return prefix.string() + ".arch" + std::to_string(k) + ".json";
}
fs::path done_path(const fs::path& prefix) { return prefix.string() + ".done"; }
fs::path oom_path(const fs::path& prefix) { return prefix.string() + ".oom"; }

std::vector<JobSpec> expand_jobs(const JobTemplate& tmpl, const std::string& experiment_id,
                                 const ExpandOptions& options) {
  if (experiment_id.empty()) throw ConfigError("experiment id must not be empty");
  const std::size_t n = tmpl.num_jobs();
  std::vector<JobSpec> jobs;
  jobs.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    JobSpec spec;
    spec.index = options.first_index + j;
    spec.name = experiment_id + "." + std::to_string(spec.index);
    spec.prefix = options.out_dir / spec.name;
    spec.sentinel = done_path(spec.prefix);
    spec.oom_sentinel = oom_path(spec.prefix);
    spec.retries_left = options.retries;
    // mixed-radix digits of j, last group fastest
    std::vector<std::size_t> digit(tmpl.groups.size());
    std::size_t rest = j;
    for (std::size_t g = tmpl.groups.size(); g-- > 0;) {
      digit[g] = rest % tmpl.groups[g].items.size();
      rest /= tmpl.groups[g].items.size();
    }
    std::string args = tmpl.pieces[0];
    for (std::size_t g = 0; g < tmpl.groups.size(); ++g) {
      spec.choices.push_back(tmpl.groups[g].items[digit[g]]);
      args += spec.choices.back();
      args += tmpl.pieces[g + 1];
    }
    std::string cmd = tmpl.command + " " + args;
    if (!options.arch_path.empty() && cmd.find(kArchToken) == std::string::npos) {
      cmd += " --arch " + std::string(kArchToken);
    }
    if (!options.extra_args.empty()) cmd += " " + options.extra_args;
    std::istringstream words(cmd);
    std::string word;
    while (words >> word) {
      for (auto token : {kExperimentIdToken, kSaveMetricsToken, kSlotToken, kSlotTokenAlt, kEvalFreqToken, kArchToken}) {
        if (count_occurrences(word, token) > 1) {
          throw ConfigError("token " + std::string(token) + " appears twice in argument '" + word + "'");
        }
      }
    }
    replace_all(cmd, kExperimentIdToken, experiment_id);
    replace_all(cmd, kSaveMetricsToken, spec.prefix.string());
    if (options.eval_freq) replace_all(cmd, kEvalFreqToken, format_double(*options.eval_freq));
    if (!options.arch_path.empty()) replace_all(cmd, kArchToken, options.arch_path);
    spec.command = std::move(cmd);
    jobs.push_back(std::move(spec));
  }
  return jobs;
}

void ensure_fresh_experiment(const fs::path& out_dir, const std::string& experiment_id) {
  if (!fs::exists(out_dir)) return;
  const std::string prefix = experiment_id + ".";
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0) {
      throw ConfigError("experiment id '" + experiment_id + "' already has files in '" + out_dir.string() +
                        "' (e.g. " + name + "); pick a new id");
    }
  }
}

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::kDone: return "done";
    case Outcome::kOom: return "oom";
    case Outcome::kFailed: return "failed";
  }
  return "failed";
}

std::size_t ExecutionReport::completed() const {
  return static_cast<std::size_t>(std::count(final_outcome.begin(), final_outcome.end(), Outcome::kDone));
}

std::size_t ExecutionReport::failed() const { return final_outcome.size() - completed(); }

std::string ExecutionReport::to_json() const {
  json j;
  j["max_concurrency"] = max_concurrency;
  j["wall_seconds"] = wall_seconds;
  j["completed"] = completed();
  j["failed"] = failed();
  j["timeline"] = json::array();
  for (const auto& r : timeline) {
    j["timeline"].push_back({{"job", r.job},
                             {"slot", r.slot},
                             {"attempt", r.attempt},
                             {"start", r.start},
                             {"stop", r.stop},
                             {"outcome", outcome_name(r.outcome)},
                             {"exit_code", r.exit_code}});
  }
  j["outcomes"] = json::array();
  for (Outcome o : final_outcome) j["outcomes"].push_back(outcome_name(o));
  return j.dump(2);
}

ExecutionReport schedule(std::vector<JobSpec> jobs, const std::vector<std::string>& slots, std::size_t jobs_per_slot,
                         const ScheduleOptions& options) {
  if (slots.empty()) throw ConfigError("scheduling needs at least one slot");
  if (jobs_per_slot == 0) throw ConfigError("jobs per slot must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  ExecutionReport report;
  report.final_outcome.assign(jobs.size(), Outcome::kFailed);

  struct Running {
    std::size_t job;
    pid_t pid;
    int pidfd;
    std::size_t slot;
    std::size_t record;
  };
  std::deque<std::size_t> queue;
  for (std::size_t j = 0; j < jobs.size(); ++j) queue.push_back(j);
  std::vector<std::size_t> attempts(jobs.size(), 0);
  std::vector<std::size_t> used(slots.size(), 0);
  std::vector<Running> running;

  // filesystem events wake the loop early when sentinels appear
  const int inotify_fd = inotify_init1(IN_NONBLOCK | IN_CLOEXEC);
  if (inotify_fd >= 0) {
    std::set<fs::path> dirs;
    for (const auto& j : jobs) dirs.insert(fs::absolute(j.sentinel).parent_path());
    for (const auto& d : dirs) {
      fs::create_directories(d);
      inotify_add_watch(inotify_fd, d.c_str(), IN_CREATE | IN_CLOSE_WRITE | IN_MOVED_TO);
    }
  }

  auto launch = [&](std::size_t j, std::size_t slot) {
    const JobSpec& spec = jobs[j];
    RunRecord rec;
    rec.job = j;
    rec.slot = slots[slot];
    rec.attempt = attempts[j]++;
    rec.start = seconds_since(t0);
    const std::string cmd = spec.command_for_slot(slots[slot]);
    const std::string log = spec.prefix.string() + ".log";
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
    const char* argv[] = {"/bin/sh", "-c", cmd.c_str(), nullptr};
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (!options.quiet) spdlog::info("launch {} on slot {}: {}", spec.name, slots[slot], cmd);
    if (rc != 0) {
      rec.stop = rec.start;
      rec.outcome = Outcome::kFailed;
      rec.exit_code = -1;
      report.timeline.push_back(rec);
      return;
    }
    const int pidfd = static_cast<int>(syscall(SYS_pidfd_open, pid, 0));
    report.timeline.push_back(rec);
    running.push_back({j, pid, pidfd, slot, report.timeline.size() - 1});
    ++used[slot];
    report.max_concurrency = std::max(report.max_concurrency, running.size());
  };

  auto finish = [&](const Running& r, int status) {
    RunRecord& rec = report.timeline[r.record];
    rec.stop = seconds_since(t0);
    rec.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    JobSpec& spec = jobs[r.job];
    std::error_code ec;
    if (fs::exists(spec.sentinel, ec)) {
      rec.outcome = Outcome::kDone;
      report.final_outcome[r.job] = Outcome::kDone;
    } else if (fs::exists(spec.oom_sentinel, ec)) {
      fs::remove(spec.oom_sentinel, ec);
      rec.outcome = Outcome::kOom;
      if (spec.retries_left > 0) {
        --spec.retries_left;
        queue.push_back(r.job);
        report.final_outcome[r.job] = Outcome::kOom;
      } else {
        report.final_outcome[r.job] = Outcome::kFailed;
      }
    } else {
      rec.outcome = Outcome::kFailed;
      report.final_outcome[r.job] = Outcome::kFailed;
    }
    if (!options.quiet) spdlog::info("{} finished: {}", spec.name, outcome_name(rec.outcome));
    --used[r.slot];
    if (r.pidfd >= 0) close(r.pidfd);
  };

  while (true) {
    while (!queue.empty()) {
      std::size_t slot = slots.size();
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (used[s] < jobs_per_slot && (slot == slots.size() || used[s] < used[slot])) slot = s;
      }
      if (slot == slots.size()) break;
      const std::size_t j = queue.front();
      queue.pop_front();
      launch(j, slot);
    }
    if (running.empty()) {
      if (queue.empty()) break;
      continue;
    }
    std::vector<pollfd> fds;
    if (inotify_fd >= 0) fds.push_back({inotify_fd, POLLIN, 0});
    for (const auto& r : running) {
      if (r.pidfd >= 0) fds.push_back({r.pidfd, POLLIN, 0});
    }
    poll(fds.data(), fds.size(), static_cast<int>(options.poll_interval.count()));
    if (inotify_fd >= 0) {
      char buf[4096];
      while (read(inotify_fd, buf, sizeof buf) > 0) {
      }
    }
    for (std::size_t k = 0; k < running.size();) {
      int status = 0;
      const pid_t rc = waitpid(running[k].pid, &status, WNOHANG);
      if (rc == running[k].pid || rc < 0) {
        finish(running[k], rc < 0 ? 0 : status);
        running.erase(running.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        ++k;
      }
    }
  }
  if (inotify_fd >= 0) close(inotify_fd);
  report.wall_seconds = seconds_since(t0);
  return report;
}

PipelineReport run_pipeline(const fs::path& dnas_config, const fs::path& sampled_config,
                            const PipelineOptions& options) {
  fs::create_directories(options.out_dir);
  ensure_fresh_experiment(options.out_dir, options.experiment_id);
  PipelineReport report;
  report.status_log = options.out_dir / (options.experiment_id + ".pipeline.log");
  const JobTemplate t1 = parse_config_file(dnas_config);
  const JobTemplate t2 = parse_config_file(sampled_config);

  ExpandOptions e1;
  e1.out_dir = options.out_dir;
  e1.extra_args = options.data_args;
  if (!t1.eval_freqs.empty()) e1.eval_freq = t1.eval_freqs[0];
  auto jobs1 = expand_jobs(t1, options.experiment_id + ".dnas", e1);
  append_status(report.status_log, "started supernet training: " + std::to_string(jobs1.size()) + " jobs");
  report.supernet_phase = schedule(jobs1, t1.slots, t1.jobs_per_slot, options.schedule);
  append_status(report.status_log, "finished supernet training: " + std::to_string(report.supernet_phase.completed()) +
                                        " done, " + std::to_string(report.supernet_phase.failed()) + " failed");
  if (report.supernet_phase.completed() == 0) {
    append_status(report.status_log, "aborted: every supernet job failed");
    throw Error("pipeline aborted: every supernet training job failed (see " + report.status_log.string() + ")");
  }

  for (std::size_t j = 0; j < jobs1.size(); ++j) {
    if (report.supernet_phase.final_outcome[j] != Outcome::kDone) continue;
    for (std::size_t k = 0;; ++k) {
      const fs::path p = descriptor_path(jobs1[j].prefix, k);
      if (!fs::exists(p)) break;
      report.descriptors.push_back(p);
    }
  }
  if (report.descriptors.empty()) {
    spdlog::warn("no architectures were sampled; skipping sampled architecture training");
    append_status(report.status_log, "no architectures sampled; sampled architecture training skipped");
    return report;
  }

  std::vector<JobSpec> jobs2;
  for (const auto& d : report.descriptors) {
    ExpandOptions e2;
    e2.out_dir = options.out_dir;
    e2.extra_args = options.data_args;
    if (t2.eval_freqs.size() > 1) {
      e2.eval_freq = t2.eval_freqs[1];
    } else if (!t2.eval_freqs.empty()) {
      e2.eval_freq = t2.eval_freqs[0];
    }
    e2.arch_path = d.string();
    e2.first_index = jobs2.size();
    auto more = expand_jobs(t2, options.experiment_id + ".sampled", e2);
    jobs2.insert(jobs2.end(), more.begin(), more.end());
  }
  append_status(report.status_log, "started sampled architecture training: " + std::to_string(jobs2.size()) + " jobs");
  report.sampled_phase = schedule(jobs2, t2.slots, t2.jobs_per_slot, options.schedule);
  append_status(report.status_log, "finished sampled architecture training: " +
                                        std::to_string(report.sampled_phase->completed()) + " done, " +
                                        std::to_string(report.sampled_phase->failed()) + " failed");
  return report;
}

std::vector<HeatmapRow> export_heatmap(const fs::path& checkpoint, const fs::path& out_csv) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.thetas.empty()) throw CheckpointError("'" + checkpoint.string() + "' holds no architecture parameters");
  std::vector<HeatmapRow> rows;
  for (const auto& t : ckpt.thetas) {
    const ag::Tensor p = ag::softmax(t.tensor.detach());
    rows.push_back({t.name, std::vector<double>(p.values().begin(), p.values().end())});
  }
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot write '" + out_csv.string() + "'");
    out.precision(12);
    for (const auto& r : rows) {
      out << r.name;
      for (double p : r.probs) out << ',' << p;
      out << '\n';
    }
  }
  return rows;
}

Stats summarize(std::vector<double> values) {
  if (values.empty()) throw UndefinedMetricError("statistics of an empty set");
  std::sort(values.begin(), values.end());
  Stats s;
  s.min = values.front();
  s.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  const std::size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

double ResultRow::best_calibration_distance() const {
  const double c = calibration.at(best);
  return std::isfinite(c) ? std::abs(c - 1.0) : std::numeric_limits<double>::quiet_NaN();
}

std::string ResultSummary::to_json() const {
  auto stats = [](const Stats& s) {
    return json{{"min", s.min}, {"mean", s.mean}, {"median", s.median}, {"max", s.max}};
  };
  json j;
  j["skipped_files"] = skipped_files;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"job", r.job},
                         {"hyperparameters", json::parse(r.hyperparameters_json)},
                         {"best_epoch", r.epochs.at(r.best)},
                         {"val_logloss", r.best_logloss()},
                         {"calibration_distance", std::isfinite(r.best_calibration_distance())
                                                      ? json(r.best_calibration_distance())
                                                      : json(nullptr)},
                         {"efficiency", r.efficiency},
                         {"epochs", r.epochs},
                         {"val_logloss_per_epoch", r.val_logloss}});
  }
  j["logloss"] = stats(logloss);
  j["calibration_distance"] = stats(calibration_distance);
  j["efficiency"] = stats(efficiency);
  return j.dump(2);
}

ResultSummary aggregate_results(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 14 && name.ends_with(".metrics.jsonl")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ResultSummary summary;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    ResultRow row;
    row.job = f.filename().string().substr(0, f.filename().string().size() - 14);
    row.hyperparameters_json = "{}";
    bool malformed = false, saw_header = false;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      try {
        const json j = json::parse(line);
        const std::string type = j.value("type", "");
        if (type == "header") saw_header = true;
        if (type != "epoch") continue;
        row.epochs.push_back(j.at("epoch").get<double>());
        row.val_logloss.push_back(j.at("val_logloss").get<double>());
        const auto& c = j.at("calibration");
        row.calibration.push_back(c.is_null() ? std::numeric_limits<double>::quiet_NaN() : c.get<double>());
        row.efficiency = j.value("efficiency", 0.0);
        if (j.contains("job")) row.job = j["job"].get<std::string>();
        if (j.contains("hyperparameters")) row.hyperparameters_json = j["hyperparameters"].dump();
      } catch (const json::exception& e) {
        malformed = true;
        spdlog::warn("skipping malformed result file {}: {}", f.string(), e.what());
        break;
      }
    }
    if (malformed) {
      ++summary.skipped_files;
      continue;
    }
    if (row.epochs.empty()) {
      // supernet logs carry no per-epoch validation records
      if (!saw_header) {
        spdlog::warn("skipping result file {} without epoch records", f.string());
        ++summary.skipped_files;
      }
      continue;
    }
    row.best = static_cast<std::size_t>(
        std::min_element(row.val_logloss.begin(), row.val_logloss.end()) - row.val_logloss.begin());
    summary.rows.push_back(std::move(row));
  }
  if (summary.rows.empty()) throw UndefinedMetricError("no result files with epoch records in '" + dir.string() + "'");
  std::vector<double> ll, cal, eff;
  for (const auto& r : summary.rows) {
    ll.push_back(r.best_logloss());
    const double c = r.best_calibration_distance();
    if (std::isfinite(c)) cal.push_back(c);
    eff.push_back(r.efficiency);
  }
  summary.logloss = summarize(ll);
  if (!cal.empty()) summary.calibration_distance = summarize(cal);
  summary.efficiency = summarize(eff);
  return summary;
}

}  // namespace dnas::orch
