#include "dnas/search.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "json.hpp"

namespace dnas {

using nlohmann::json;

namespace {

constexpr double kEpochEps = 1e-9;

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("bad number '" + std::string(s) + "' in " + std::string(what));
  }
  return v;
}

std::size_t segment_steps(double duration, std::size_t batches_per_epoch) {
  const auto n = static_cast<long long>(std::llround(duration * static_cast<double>(batches_per_epoch)));
  return static_cast<std::size_t>(std::max<long long>(1, n));
}

class JsonLog {
 public:
  explicit JsonLog(const std::filesystem::path& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot write metrics log '" + path.string() + "'");
  }
  void write(const json& j) {
    if (!out_.is_open()) return;
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

std::string_view phase_name(Phase phase) { return phase == Phase::kWeights ? "weights" : "arch"; }

LrSchedule LrSchedule::parse(std::string_view spec) {
  LrSchedule s;
  const auto colon = spec.find(':');
  const std::string_view tag = spec.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (tag == "constant") {
    if (!rest.empty()) throw ConfigError("constant LR schedule takes no arguments");
    return s;
  }
  if (tag == "exponential") {
    s.kind = Kind::kExponential;
    s.gamma = parse_double(rest, "exponential LR schedule");
    return s;
  }
  if (tag == "step") {
    s.kind = Kind::kStep;
    const auto c2 = rest.find(':');
    s.gamma = parse_double(rest.substr(0, c2), "step LR schedule");
    if (c2 != std::string_view::npos) {
      std::string_view ms = rest.substr(c2 + 1);
      while (!ms.empty()) {
        const auto comma = ms.find(',');
        s.milestones.push_back(parse_double(ms.substr(0, comma), "step LR milestones"));
        if (comma == std::string_view::npos) break;
        ms.remove_prefix(comma + 1);
      }
    }
    std::sort(s.milestones.begin(), s.milestones.end());
    return s;
  }
  throw ConfigError("unknown LR schedule '" + std::string(spec) + "'");
}

std::string LrSchedule::to_string() const {
  std::ostringstream o;
  switch (kind) {
    case Kind::kConstant: return "constant";
    case Kind::kExponential: o << "exponential:" << gamma; return o.str();
    case Kind::kStep:
      o << "step:" << gamma << ':';
      for (std::size_t i = 0; i < milestones.size(); ++i) o << (i ? "," : "") << milestones[i];
      return o.str();
  }
  return "constant";
}

double lr_schedule(const LrSchedule& schedule, double epochs_completed) {
  switch (schedule.kind) {
    case LrSchedule::Kind::kConstant: return 1.0;
    case LrSchedule::Kind::kExponential: return std::pow(schedule.gamma, epochs_completed);
    case LrSchedule::Kind::kStep: {
      const auto passed = std::count_if(schedule.milestones.begin(), schedule.milestones.end(),
                                        [&](double m) { return epochs_completed + kEpochEps >= m; });
      return std::pow(schedule.gamma, static_cast<double>(passed));
    }
  }
  throw ConfigError("unknown LR schedule kind");
}

OptimizerConfig::Kind OptimizerConfig::parse_kind(std::string_view name) {
  if (name == "sgd") return Kind::kSgd;
  if (name == "adam") return Kind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and nonnegative");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

Optimizer::Optimizer(std::vector<NamedTensor> params, OptimizerConfig config)
    : params_(std::move(params)), config_(std::move(config)) {
  config_.validate();
  for (const auto& p : params_) {
    if (!p.tensor.requires_grad() || !p.tensor.is_leaf()) {
      throw ConfigError("optimizer parameter '" + p.name + "' is not a trainable leaf");
    }
  }
  if (config_.kind == OptimizerConfig::Kind::kAdam || config_.momentum > 0.0) {
    for (const auto& p : params_) m_.emplace_back(p.tensor.size(), 0.0);
  }
  if (config_.kind == OptimizerConfig::Kind::kAdam) {
    for (const auto& p : params_) v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Optimizer::step() {
  ++steps_;
  const double lr = current_lr();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Tensor t = params_[i].tensor;
    auto w = t.mutable_values();
    auto g = t.grad();
    if (config_.kind == OptimizerConfig::Kind::kSgd) {
      if (config_.momentum > 0.0) {
        auto& m = m_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = config_.momentum * m[k] + g[k];
          w[k] -= lr * m[k];
        }
      } else {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
      }
      continue;
    }
    auto& m = m_[i];
    auto& v = v_[i];
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
  }
}

double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      ag::Tensor t = p.tensor;
      for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void SearchConfig::validate() const {
  if (!(n_total_s_net_training_epochs > 0.0)) throw ConfigError("total supernet training epochs must be positive");
  if (num_warmup_epochs < 0.0) throw ConfigError("warmup epochs must be nonnegative");
  if (num_warmup_epochs > n_total_s_net_training_epochs + kEpochEps) {
    throw ConfigError("warmup epochs exceed total training epochs");
  }
  if (!(n_alt_train_amt > 0.0)) throw ConfigError("alternation amount must be positive");
  if (clip_grad_norm_value < 0.0) throw ConfigError("clip_grad_norm_value must be nonnegative");
  temperature.validate();
  loss.validate();
  weights_optimizer.validate();
  arch_optimizer.validate();
  for (const auto& [k, n] : arch_sampling) {
    if (k < 0.0) throw ConfigError("architecture sampling keys must be nonnegative");
  }
}

double EpochPlan::weight_epochs() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.phase == Phase::kWeights ? s.duration : 0.0;
  return t;
}

double EpochPlan::arch_epochs() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.phase == Phase::kArch ? s.duration : 0.0;
  return t;
}

std::size_t EpochPlan::total_samples() const {
  std::size_t t = 0;
  for (const auto& s : segments) t += s.archs_to_sample_after;
  return t;
}

EpochPlan calc_epoch_training_params(const SearchConfig& cfg) {
  cfg.validate();
  const double total = cfg.n_total_s_net_training_epochs;
  const double alt = cfg.n_alt_train_amt;
  EpochPlan plan;
  double w_done = 0.0, a_done = 0.0;
  auto push = [&](Phase phase, double duration) {
    Segment s;
    s.phase = phase;
    s.duration = duration;
    s.tau = temperature(cfg.temperature, w_done);
    s.weight_epochs_before = w_done;
    s.arch_epochs_before = a_done;
    plan.segments.push_back(s);
    (phase == Phase::kWeights ? w_done : a_done) += duration;
  };
  while (w_done + kEpochEps < cfg.num_warmup_epochs) {
    push(Phase::kWeights, std::min(alt, cfg.num_warmup_epochs - w_done));
  }
  while (w_done + kEpochEps < total) {
    push(Phase::kWeights, std::min(alt, total - w_done));
    push(Phase::kArch, alt);
  }
  for (const auto& [key, count] : cfg.arch_sampling) {
    if (count == 0) continue;
    bool placed = false;
    double arch_after = 0.0;
    for (auto& s : plan.segments) {
      arch_after = s.arch_epochs_before + (s.phase == Phase::kArch ? s.duration : 0.0);
      if (arch_after + kEpochEps >= key) {
        s.archs_to_sample_after += count;
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw ConfigError("architecture sampling at " + std::to_string(key) + " arch epochs, but the plan only reaches " +
                        std::to_string(a_done));
    }
  }
  return plan;
}

Optimizers make_optimizers(const DlrmSupernet& supernet, const SearchConfig& cfg) {
  return Optimizers{Optimizer(supernet.weight_parameters(), cfg.weights_optimizer),
                    Optimizer(supernet.arch_parameters(), cfg.arch_optimizer)};
}

namespace {

// NaN weights make predictions NaN, which the loss would reject as a domain error.
void check_predictions(const ag::Tensor& p, std::size_t step) {
  for (double v : p.values()) {
    if (!std::isfinite(v)) throw DivergenceError(step, v);
  }
}

}  // namespace

StepResult run_one_dnas_step(const data::Batch& batch, Phase phase, DlrmSupernet& supernet, Optimizers& optimizers,
                             const SearchConfig& cfg, const SamplingContext& ctx, std::size_t step_index) {
  optimizers.weights.zero_grad();
  optimizers.arch.zero_grad();
  ag::Tensor p = supernet.forward(batch, ctx);
  check_predictions(p, step_index);
  ag::Tensor task = ag::bce_loss(p, batch.labels);
  ag::Tensor cost = supernet.current_cost();
  ag::Tensor total = total_loss(task, cost, cfg.loss);
  StepResult r{task.item(), cost.item(), total.item(), 0.0};
  if (!std::isfinite(r.total_loss)) throw DivergenceError(step_index, r.total_loss);
  total.backward();
  Optimizer& opt = phase == Phase::kWeights ? optimizers.weights : optimizers.arch;
  r.grad_norm = clip_grad_norm(opt.params(), cfg.clip_grad_norm_value);
  opt.step();
  return r;
}

SearchResult train_dnas(DlrmSupernet& supernet, data::DataLoader& w_loader, data::DataLoader& m_loader,
                        const SearchConfig& cfg, const TrainHooks& hooks) {
  SearchResult result;
  result.plan = calc_epoch_training_params(cfg);
  Optimizers opts = make_optimizers(supernet, cfg);
  Rng noise_rng(mix_seed(cfg.seed, 1));
  Rng sample_rng(mix_seed(cfg.seed, 2));
  JsonLog log(cfg.logfile);
  log.write({{"type", "header"},
             {"experiment_id", cfg.experiment_id},
             {"supernet", supernet.config().id},
             {"group", search_group_name(supernet.config().group)},
             {"segments", result.plan.segments.size()},
             {"weight_epochs", result.plan.weight_epochs()},
             {"arch_epochs", result.plan.arch_epochs()}});

  std::size_t step = 0;
  for (std::size_t si = 0; si < result.plan.segments.size(); ++si) {
    const Segment& seg = result.plan.segments[si];
    const bool weights = seg.phase == Phase::kWeights;
    data::DataLoader& loader = weights ? w_loader : m_loader;
    const std::size_t n_steps = segment_steps(seg.duration, loader.batches_per_epoch());
    SamplingContext ctx{seg.tau, &noise_rng, false};
    auto set_lrs = [&](double frac) {
      const double w_ep = seg.weight_epochs_before + (weights ? frac * seg.duration : 0.0);
      const double a_ep = seg.arch_epochs_before + (weights ? 0.0 : frac * seg.duration);
      opts.weights.set_lr_multiplier(lr_schedule(cfg.weights_optimizer.schedule, w_ep));
      opts.arch.set_lr_multiplier(lr_schedule(cfg.arch_optimizer.schedule, a_ep));
    };
    set_lrs(0.0);
    SegmentMetrics m;
    m.index = si;
    m.phase = seg.phase;
    m.duration = seg.duration;
    m.tau = seg.tau;
    m.weights_lr = opts.weights.current_lr();
    m.arch_lr = opts.arch.current_lr();
    for (std::size_t k = 0; k < n_steps; ++k) {
      if (cfg.update_lrs_every_step) set_lrs(static_cast<double>(k) / static_cast<double>(n_steps));
      data::Batch batch = loader.next();
      if (hooks.on_batch) hooks.on_batch(seg.phase, batch);
      StepResult r;
      try {
        r = run_one_dnas_step(batch, seg.phase, supernet, opts, cfg, ctx, step);
      } catch (const DivergenceError& e) {
        log.write({{"type", "failure"}, {"step", e.step()}, {"segment", si}, {"loss", std::to_string(e.loss())}});
        throw;
      }
      m.task_loss += r.task_loss;
      m.cost += r.cost;
      m.total_loss += r.total_loss;
      if (cfg.log_steps) {
        log.write({{"type", "step"},
                   {"step", step},
                   {"phase", phase_name(seg.phase)},
                   {"tau", seg.tau},
                   {"task_loss", r.task_loss},
                   {"cost", r.cost},
                   {"total_loss", r.total_loss},
                   {"weights_lr", opts.weights.current_lr()},
                   {"arch_lr", opts.arch.current_lr()}});
      }
      ++step;
    }
    m.steps = n_steps;
    m.task_loss /= static_cast<double>(n_steps);
    m.cost /= static_cast<double>(n_steps);
    m.total_loss /= static_cast<double>(n_steps);
    m.expected_cost = supernet.expected_cost();
    log.write({{"type", "segment"},
               {"segment", si},
               {"phase", phase_name(seg.phase)},
               {"duration", seg.duration},
               {"tau", seg.tau},
               {"steps", n_steps},
               {"task_loss", m.task_loss},
               {"cost", m.cost},
               {"total_loss", m.total_loss},
               {"expected_cost", m.expected_cost},
               {"weights_lr", m.weights_lr},
               {"arch_lr", m.arch_lr}});
    result.metrics.push_back(m);
    if (hooks.on_segment) hooks.on_segment(m);

    const double arch_done = seg.arch_epochs_before + (weights ? 0.0 : seg.duration);
    for (std::size_t k = 0; k < seg.archs_to_sample_after; ++k) {
      ArchDescriptor d = supernet.sample_architecture(sample_rng);
      d.sampling_epoch = arch_done;
      log.write({{"type", "sample"}, {"segment", si}, {"arch", json::parse(d.to_json())}});
      result.sampled.push_back(std::move(d));
    }
  }
  result.steps = step;
  return result;
}

void SampledTrainConfig::validate() const {
  if (!(epochs > 0.0)) throw ConfigError("training epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(evals_per_epoch > 0.0)) throw ConfigError("evaluations per epoch must be positive");
  optimizer.validate();
}

SampledTrainResult train_sampled(Dlrm& model, const data::DatasetView& train, const data::DatasetView& val,
                                 const SampledTrainConfig& cfg, const data::DatasetView* test) {
  cfg.validate();
  data::DataLoader loader(train, cfg.batch_size, mix_seed(cfg.seed, 3), true);
  Optimizer opt(model.parameters(), cfg.optimizer);
  JsonLog log(cfg.metrics_path);
  const json hyper = json::parse(cfg.hyperparameters_json);

  const std::size_t per_epoch = loader.batches_per_epoch();
  const auto total_steps = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(cfg.epochs * static_cast<double>(per_epoch))));
  const auto eval_every = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(static_cast<double>(per_epoch) / cfg.evals_per_epoch)));

  SampledTrainResult result;
  std::vector<std::vector<double>> best_values;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t step = 1; step <= total_steps; ++step) {
    opt.set_lr_multiplier(lr_schedule(cfg.optimizer.schedule, static_cast<double>(step - 1) / static_cast<double>(per_epoch)));
    opt.zero_grad();
    data::Batch batch = loader.next();
    ag::Tensor pred = model.forward(batch);
    double lv = std::numeric_limits<double>::quiet_NaN();
    ag::Tensor loss;
    if (std::all_of(pred.values().begin(), pred.values().end(), [](double v) { return std::isfinite(v); })) {
      loss = ag::bce_loss(pred, batch.labels);
      lv = loss.item();
    }
    if (!std::isfinite(lv)) {
      log.write({{"type", "failure"}, {"job", cfg.job_id}, {"step", step}, {"loss", std::to_string(lv)}});
      throw DivergenceError(step, lv);
    }
    loss.backward();
    clip_grad_norm(opt.params(), cfg.clip_grad_norm_value);
    opt.step();
    loss_sum += lv;
    ++loss_count;

    if (step % eval_every != 0 && step != total_steps) continue;
    const EvalResult ev = evaluate(model, val, 1024);
    EpochRecord rec{static_cast<double>(step) / static_cast<double>(per_epoch), loss_sum / static_cast<double>(loss_count),
                    ev.logloss, ev.calibration};
    loss_sum = 0.0;
    loss_count = 0;
    result.history.push_back(rec);
    if (result.history.size() == 1 || rec.val_logloss < result.history[result.best].val_logloss) {
      result.best = result.history.size() - 1;
      if (test) {
        best_values.clear();
        for (const auto& p : model.parameters()) best_values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
      }
    }
    log.write({{"type", "epoch"},
               {"job", cfg.job_id},
               {"epoch", rec.epoch},
               {"train_loss", rec.train_loss},
               {"val_logloss", rec.val_logloss},
               {"calibration", std::isfinite(rec.val_calibration) ? json(rec.val_calibration) : json(nullptr)},
               {"efficiency", cfg.efficiency},
               {"hyperparameters", hyper}});
  }

  const EpochRecord& best = result.history[result.best];
  json summary{{"type", "result"},
               {"job", cfg.job_id},
               {"best_epoch", best.epoch},
               {"val_logloss", best.val_logloss},
               {"calibration", std::isfinite(best.val_calibration) ? json(best.val_calibration) : json(nullptr)},
               {"efficiency", cfg.efficiency},
               {"hyperparameters", hyper}};
  if (test) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i].tensor.mutable_values();
      std::copy(best_values[i].begin(), best_values[i].end(), dst.begin());
    }
    result.test = evaluate(model, *test, 1024);
    summary["test_logloss"] = result.test->logloss;
    summary["test_calibration"] = result.test->calibration;
  }
  log.write(summary);
  return result;
}

}  // namespace dnas
