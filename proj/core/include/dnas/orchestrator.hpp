#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dnas::orch {

inline constexpr std::string_view kExperimentIdToken = "EXPERIMENT_ID";
inline constexpr std::string_view kSaveMetricsToken = "SAVE_METRICS_PARAM";
inline constexpr std::string_view kSlotToken = "GPU_ID_PARAM";
inline constexpr std::string_view kSlotTokenAlt = "HOST_GPU_ID";
inline constexpr std::string_view kEvalFreqToken = "EVAL_FREQ_PARAM";
inline constexpr std::string_view kArchToken = "ARCH_PARAM";

struct BraceGroup {
  std::vector<std::string> items;  // trimmed; may contain "" for an optional flag
};

/// Parsed tuning config: the command, an argument string with brace groups
/// cut out, and the worker-slot lines.
struct JobTemplate {
  std::string command;
  // pieces.size() == groups.size() + 1; the argument string is
  // pieces[0] {groups[0]} pieces[1] ... {groups[n-1]} pieces[n]
  std::vector<std::string> pieces;
  std::vector<BraceGroup> groups;
  std::vector<std::string> slots;
  std::size_t jobs_per_slot = 1;
  std::vector<double> eval_freqs;

  std::size_t num_jobs() const;
};

JobTemplate parse_config(std::string_view text);
JobTemplate parse_config_file(const std::filesystem::path& path);

struct JobSpec {
  std::size_t index = 0;
  std::string name;                 // <experiment_id>.<index>
  std::string command;              // slot token still unsubstituted
  std::vector<std::string> choices; // one item per brace group
  std::filesystem::path prefix;     // <out_dir>/<name>
  std::filesystem::path sentinel;   // prefix.done
  std::filesystem::path oom_sentinel;
  std::size_t retries_left = 2;

  std::string command_for_slot(const std::string& slot) const;
};

inline constexpr std::size_t kDefaultOomRetries = 2;

struct ExpandOptions {
  std::filesystem::path out_dir = ".";
  std::string extra_args;           // appended to every job
  std::optional<double> eval_freq;  // substituted for EVAL_FREQ_PARAM
  std::string arch_path;            // substituted for ARCH_PARAM (appended as --arch if absent)
  std::size_t first_index = 0;
  std::size_t retries = kDefaultOomRetries;
};

/// Cartesian product over brace groups (first group varies slowest).
std::vector<JobSpec> expand_jobs(const JobTemplate& tmpl, const std::string& experiment_id,
                                 const ExpandOptions& options = {});

/// ConfigError if any file in out_dir already belongs to this experiment id.
void ensure_fresh_experiment(const std::filesystem::path& out_dir, const std::string& experiment_id);

enum class Outcome { kDone, kOom, kFailed };
std::string_view outcome_name(Outcome outcome);

struct RunRecord {
  std::size_t job = 0;
  std::string slot;
  std::size_t attempt = 0;
  double start = 0.0;  // seconds since schedule start
  double stop = 0.0;
  Outcome outcome = Outcome::kFailed;
  int exit_code = 0;
};

struct ExecutionReport {
  std::vector<RunRecord> timeline;  // in launch order
  std::vector<Outcome> final_outcome;  // per job
  std::size_t max_concurrency = 0;
  double wall_seconds = 0.0;

  std::size_t completed() const;
  std::size_t failed() const;
  std::string to_json() const;
};

struct ScheduleOptions {
  std::chrono::milliseconds poll_interval{1000};
  bool quiet = false;
};

/// FIFO launch onto slots x jobs_per_slot workers. A job is done when it exits
/// with its sentinel present; an OOM sentinel requeues it at the back while
/// retries remain; anything else fails it.
ExecutionReport schedule(std::vector<JobSpec> jobs, const std::vector<std::string>& slots, std::size_t jobs_per_slot,
                         const ScheduleOptions& options = {});

struct PipelineOptions {
  std::filesystem::path out_dir = ".";
  std::string experiment_id = "pipeline";
  std::string data_args;
  ScheduleOptions schedule;
};

struct PipelineReport {
  ExecutionReport supernet_phase;
  std::vector<std::filesystem::path> descriptors;
  std::optional<ExecutionReport> sampled_phase;
  std::filesystem::path status_log;
};

/// Phase 1 runs the supernet config; every descriptor the jobs emit is then
/// crossed with the sampled config's grid for phase 2.
PipelineReport run_pipeline(const std::filesystem::path& dnas_config, const std::filesystem::path& sampled_config,
                            const PipelineOptions& options);

/// Files a job with this prefix writes.
std::filesystem::path metrics_path(const std::filesystem::path& prefix);
std::filesystem::path checkpoint_path(const std::filesystem::path& prefix);
std::filesystem::path descriptor_path(const std::filesystem::path& prefix, std::size_t k);
std::filesystem::path done_path(const std::filesystem::path& prefix);
std::filesystem::path oom_path(const std::filesystem::path& prefix);

struct HeatmapRow {
  std::string name;
  std::vector<double> probs;
};

/// softmax(theta) per decision point of a supernet checkpoint, written as CSV.
std::vector<HeatmapRow> export_heatmap(const std::filesystem::path& checkpoint,
                                       const std::filesystem::path& out_csv = {});

struct Stats {
  double min = 0.0, mean = 0.0, median = 0.0, max = 0.0;
};

Stats summarize(std::vector<double> values);

struct ResultRow {
  std::string job;
  std::string hyperparameters_json;
  std::vector<double> epochs;
  std::vector<double> val_logloss;
  std::vector<double> calibration;
  double efficiency = 0.0;
  std::size_t best = 0;  // index into epochs

  double best_logloss() const { return val_logloss.at(best); }
  double best_calibration_distance() const;
};

struct ResultSummary {
  std::vector<ResultRow> rows;
  std::size_t skipped_files = 0;
  Stats logloss, calibration_distance, efficiency;

  std::string to_json() const;
};

/// Reads every *.metrics.jsonl under dir that holds per-epoch records.
ResultSummary aggregate_results(const std::filesystem::path& dir);

}  // namespace dnas::orch
