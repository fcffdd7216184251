#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnas/cost.hpp"
#include "dnas/data.hpp"
#include "dnas/search_spaces.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

enum class Phase { kWeights, kArch };

std::string_view phase_name(Phase phase);

/// Multiplicative learning-rate factor as a function of completed epochs.
struct LrSchedule {
  enum class Kind { kConstant, kStep, kExponential };
  Kind kind = Kind::kConstant;
  double gamma = 1.0;
  std::vector<double> milestones;

  /// "constant", "step:<gamma>:<m1>,<m2>,..." or "exponential:<gamma>".
  static LrSchedule parse(std::string_view spec);
  std::string to_string() const;
};

double lr_schedule(const LrSchedule& schedule, double epochs_completed);

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kSgd;
  double lr = 0.01;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule;

  static Kind parse_kind(std::string_view name);
  void validate() const;
};

/// Plain SGD (optionally with momentum) or Adam over one parameter group.
class Optimizer {
 public:
  Optimizer(std::vector<NamedTensor> params, OptimizerConfig config);

  void set_lr_multiplier(double multiplier) { multiplier_ = multiplier; }
  double current_lr() const { return config_.lr * multiplier_; }
  void zero_grad();
  void step();

  const std::vector<NamedTensor>& params() const { return params_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  std::vector<NamedTensor> params_;
  OptimizerConfig config_;
  double multiplier_ = 1.0;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Global L2 norm of the gradients; rescales them to max_norm when above it.
/// Returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm);

struct SearchConfig {
  double n_total_s_net_training_epochs = 1.0;
  double num_warmup_epochs = 0.0;
  double n_alt_train_amt = 1.0;
  /// Architecture epochs completed -> number of architectures to sample then.
  std::map<double, std::size_t> arch_sampling;
  TemperatureSchedule temperature{1.0, 0.0};
  double clip_grad_norm_value = 100.0;
  bool update_lrs_every_step = false;
  LossConfig loss;
  OptimizerConfig weights_optimizer;
  OptimizerConfig arch_optimizer;
  std::string experiment_id = "dnas";
  std::filesystem::path logfile;  // JSON lines; empty disables the log
  std::uint64_t seed = 0;
  bool log_steps = true;

  void validate() const;
};

struct Segment {
  Phase phase = Phase::kWeights;
  double duration = 0.0;  // epochs of this phase's data
  double tau = 1.0;
  std::size_t archs_to_sample_after = 0;
  double weight_epochs_before = 0.0;
  double arch_epochs_before = 0.0;
};

struct EpochPlan {
  std::vector<Segment> segments;

  double weight_epochs() const;
  double arch_epochs() const;
  std::size_t total_samples() const;
};

/// Warmup weight segments of at most n_alt_train_amt epochs, then alternating
/// [weights][arch] segments until the weight budget is spent. Tau is fixed per
/// segment from the weight epochs completed at its start.
EpochPlan calc_epoch_training_params(const SearchConfig& cfg);

struct StepResult {
  double task_loss = 0.0;
  double cost = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;
};

struct Optimizers {
  Optimizer weights;
  Optimizer arch;
};

Optimizers make_optimizers(const DlrmSupernet& supernet, const SearchConfig& cfg);

/// Forward with soft sampling, loss, backward, clip, and a step of the phase's
/// optimizer only. DivergenceError on a non-finite loss.
StepResult run_one_dnas_step(const data::Batch& batch, Phase phase, DlrmSupernet& supernet, Optimizers& optimizers,
                             const SearchConfig& cfg, const SamplingContext& ctx, std::size_t step_index);

struct SegmentMetrics {
  std::size_t index = 0;
  Phase phase = Phase::kWeights;
  double duration = 0.0;
  double tau = 1.0;
  std::size_t steps = 0;
  double task_loss = 0.0;
  double cost = 0.0;
  double total_loss = 0.0;
  double expected_cost = 0.0;
  double weights_lr = 0.0;
  double arch_lr = 0.0;
};

struct TrainHooks {
  /// Called with every batch before it is used.
  std::function<void(Phase, const data::Batch&)> on_batch;
  /// Called after each segment.
  std::function<void(const SegmentMetrics&)> on_segment;
};

struct SearchResult {
  EpochPlan plan;
  std::vector<ArchDescriptor> sampled;  // Q_A
  std::vector<SegmentMetrics> metrics;
  std::size_t steps = 0;
};

/// Executes the epoch plan: weight segments draw from w_loader, architecture
/// segments from m_loader; samples architectures at the plan's hooks.
SearchResult train_dnas(DlrmSupernet& supernet, data::DataLoader& w_loader, data::DataLoader& m_loader,
                        const SearchConfig& cfg, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Training sampled architectures from scratch

struct SampledTrainConfig {
  double epochs = 1.0;
  std::size_t batch_size = 128;
  OptimizerConfig optimizer;
  double clip_grad_norm_value = 100.0;
  /// Validation passes per epoch (at least one at the end of training).
  double evals_per_epoch = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path metrics_path;  // JSON lines; empty disables
  std::string job_id;
  std::string hyperparameters_json = "{}";
  double efficiency = 0.0;  // reported with every record

  void validate() const;
};

struct EpochRecord {
  double epoch = 0.0;
  double train_loss = 0.0;
  double val_logloss = 0.0;
  double val_calibration = 0.0;
};

struct SampledTrainResult {
  std::vector<EpochRecord> history;
  std::size_t best = 0;  // index into history with the lowest val logloss
  std::optional<EvalResult> test;
};

SampledTrainResult train_sampled(Dlrm& model, const data::DatasetView& train, const data::DatasetView& val,
                                 const SampledTrainConfig& cfg, const data::DatasetView* test = nullptr);

}  // namespace dnas
