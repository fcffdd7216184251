#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dnas/data.hpp"
#include "dnas/errors.hpp"
#include "dnas/model.hpp"
#include "dnas/orchestrator.hpp"
#include "dnas/search.hpp"
#include "dnas/search_spaces.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 3;
constexpr int kExitOom = 4;

// Options shared by every job that reads data.
struct DataArgs {
  std::string data;
  std::size_t hash_size = 10000;
  std::string cache;
  std::uint64_t split_seed = 0;
  double w_fraction = 0.8;
  bool memory_map = false;  // accepted for config compatibility; the dataset is always resident

  void add_to(CLI::App* app) {
    app->add_option("--data", data, "Criteo-format TSV or binary cache")->required();
    app->add_option("--hash_size", hash_size, "modulus applied to every categorical id");
    app->add_option("--cache", cache, "binary cache path; read if present, written otherwise");
    app->add_option("--split_seed", split_seed, "seed for the val/test shuffle and the weights/arch split");
    app->add_option("--w_fraction", w_fraction, "share of the training split used for weights");
    app->add_flag("--memory_map", memory_map);
  }
};

bool has_cache_magic(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char buf[sizeof dnas::data::kCacheMagic] = {};
  in.read(buf, sizeof buf);
  return in.gcount() == sizeof buf && std::equal(std::begin(buf), std::end(buf), std::begin(dnas::data::kCacheMagic));
}

std::shared_ptr<const dnas::data::Dataset> load_dataset(const DataArgs& a) {
  namespace d = dnas::data;
  if (!a.cache.empty() && fs::exists(a.cache)) {
    spdlog::info("loading cache {}", a.cache);
    return std::make_shared<d::Dataset>(d::load_cache(a.cache));
  }
  if (has_cache_magic(a.data)) return std::make_shared<d::Dataset>(d::load_cache(a.data));
  spdlog::info("parsing {}", a.data);
  auto data = std::make_shared<d::Dataset>(d::preprocess(d::ingest_criteo(a.data), {a.hash_size}));
  if (!a.cache.empty()) {
    // concurrent jobs may race to build the same cache; rename keeps readers safe
    const fs::path tmp = a.cache + ".tmp." + std::to_string(::getpid());
    d::save_cache(*data, tmp);
    fs::rename(tmp, a.cache);
  }
  return data;
}

struct Splits {
  dnas::data::ChronoSplit chrono;
  dnas::data::WeightArchSplit wm;
};

Splits split_dataset(std::shared_ptr<const dnas::data::Dataset> data, const DataArgs& a) {
  dnas::data::SplitSpec spec;
  spec.seed = a.split_seed;
  spec.w_fraction = a.w_fraction;
  Splits s{dnas::data::chronological_split(std::move(data), spec), {}};
  s.wm = dnas::data::wm_split(s.chrono.train, a.w_fraction, a.split_seed);
  return s;
}

std::map<double, std::size_t> parse_arch_sampling(const std::string& text) {
  std::map<double, std::size_t> out;
  std::string item;
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream in(normalized);
  while (in >> item) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw dnas::ConfigError("arch sampling entries look like <epochs>:<count>, got '" + item + "'");
    try {
      out[std::stod(item.substr(0, colon))] += std::stoul(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw dnas::ConfigError("bad arch sampling entry '" + item + "'");
    }
  }
  return out;
}

void touch(const fs::path& p) { std::ofstream(p, std::ios::trunc); }

// ---------------------------------------------------------------------------

struct OptimizerArgs {
  std::string kind = "sgd";
  double lr = 0.01;
  double momentum = 0.0;
  std::string schedule = "constant";

  void add_to(CLI::App* app, const std::string& prefix) {
    app->add_option("--" + prefix + "optimizer", kind, "sgd or adam");
    app->add_option("--" + prefix + "lr", lr);
    app->add_option("--" + prefix + "momentum", momentum);
    app->add_option("--" + prefix + "lr_schedule", schedule, "constant | step:<gamma>:<m1>,<m2> | exponential:<gamma>");
  }

  dnas::OptimizerConfig build() const {
    dnas::OptimizerConfig c;
    c.kind = dnas::OptimizerConfig::parse_kind(kind);
    c.lr = lr;
    c.momentum = momentum;
    c.schedule = dnas::LrSchedule::parse(schedule);
    c.validate();
    return c;
  }
};

struct TrainDnasArgs {
  DataArgs data;
  std::string supernet_config;
  std::optional<std::string> search_space;
  std::optional<std::size_t> embedding_dimension;
  std::vector<double> cardinality_options;
  std::vector<std::size_t> dim_options;
  std::vector<std::size_t> bottom_mlp, top_mlp, bottom_sizes, top_sizes;
  std::optional<std::size_t> min_layers, max_layers;
  std::optional<std::string> cost_metric;
  std::optional<std::string> latency_table;
  std::optional<std::uint64_t> init_seed;

  double total_epochs = 1.0, warmup = 0.0, alt = 1.0;
  std::string arch_sampling = "1:1";
  double init_temp = 1.0, temp_decay = 0.0;
  double clip = 100.0;
  bool update_lrs_every_step = false;
  bool use_hw_cost = false, exponential_cost = false;
  double cost_coef = 0.0, cost_exp = 1.0, cost_multiplier = 1.0;
  OptimizerArgs weights_opt, arch_opt;
  std::size_t batch_size = 128;
  std::string experiment_id = "dnas";
  std::string prefix;
  std::string logfile;
  std::string host_slot;
  std::uint64_t seed = 0;
  bool no_step_log = false;
  double eval_freq = 1.0;
};

void add_train_dnas(CLI::App& app, TrainDnasArgs& a) {
  auto* c = app.add_subcommand("train-dnas", "train one DNAS supernet and sample architectures");
  a.data.add_to(c);
  c->add_option("--supernet_config", a.supernet_config, "JSON supernet config; flags below override it");
  c->add_option("--search_space", a.search_space, "mlp | emb_dim | emb_card");
  c->add_option("--embedding_dimension", a.embedding_dimension);
  c->add_option("--cardinality_options", a.cardinality_options, "emb_card hash-size factors");
  c->add_option("--dim_options", a.dim_options, "emb_dim candidate dims");
  c->add_option("--bottom_mlp", a.bottom_mlp, "fixed bottom MLP sizes after the dense input");
  c->add_option("--top_mlp", a.top_mlp, "fixed top MLP sizes after the interaction input");
  c->add_option("--bottom_sizes", a.bottom_sizes, "FC-of-FC sizes for the bottom MLP");
  c->add_option("--top_sizes", a.top_sizes, "FC-of-FC sizes for the top MLP");
  c->add_option("--min_layers", a.min_layers);
  c->add_option("--max_layers", a.max_layers);
  c->add_option("--cost_metric", a.cost_metric, "flops | embedding_params | categories | latency_table");
  c->add_option("--latency_table", a.latency_table);
  c->add_option("--init_seed", a.init_seed, "parameter initialisation seed");
  c->add_option("--n_total_s_net_training_epochs", a.total_epochs);
  c->add_option("--num_warmup_epochs", a.warmup);
  c->add_option("--n_alt_train_amt", a.alt);
  c->add_option("--arch_sampling", a.arch_sampling, "e.g. '1:2,3:2' = 2 archs after 1 arch epoch, 2 after 3");
  c->add_option("--init_temp", a.init_temp);
  c->add_option("--temp_decay", a.temp_decay);
  c->add_option("--clip_grad_norm_value", a.clip);
  c->add_flag("--update_lrs_every_step", a.update_lrs_every_step);
  c->add_flag("--use_hw_cost", a.use_hw_cost);
  c->add_flag("--exponential_cost", a.exponential_cost);
  c->add_option("--cost_coef", a.cost_coef);
  c->add_option("--cost_exp", a.cost_exp);
  c->add_option("--cost_multiplier", a.cost_multiplier);
  a.weights_opt.add_to(c, "weights_");
  a.arch_opt.add_to(c, "arch_");
  c->add_option("--batch_size", a.batch_size);
  c->add_option("--experiment_id", a.experiment_id);
  c->add_option("--save_metrics_param", a.prefix, "path prefix for every file this job writes");
  c->add_option("--logfile", a.logfile, "metrics log (default <prefix>.metrics.jsonl)");
  c->add_option("--host_gpu_id,--gpu_id", a.host_slot, "worker slot id (informational)");
  c->add_option("--seed", a.seed);
  c->add_flag("--no_step_log", a.no_step_log);
  c->add_option("--eval_freq", a.eval_freq, "accepted for config symmetry; supernet jobs log per segment");
}

dnas::DlrmSupernetConfig supernet_config_from(const TrainDnasArgs& a, const dnas::data::Dataset& data) {
  dnas::DlrmSupernetConfig cfg;
  if (!a.supernet_config.empty()) {
    std::ifstream in(a.supernet_config);
    if (!in) throw dnas::IoError("cannot open '" + a.supernet_config + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = dnas::DlrmSupernetConfig::from_json(buf.str());
  }
  cfg.id = fs::path(a.prefix).filename().string();
  cfg.num_dense = data.num_dense();
  cfg.cardinalities = data.cardinalities();
  if (a.search_space) cfg.group = dnas::parse_search_group(*a.search_space);
  if (a.embedding_dimension) {
    cfg.embedding_dim = *a.embedding_dimension;
    if (a.bottom_mlp.empty() && !cfg.bottom_mlp.empty()) cfg.bottom_mlp.back() = *a.embedding_dimension;
  }
  if (!a.cardinality_options.empty()) cfg.card_factors = a.cardinality_options;
  if (!a.dim_options.empty()) cfg.dim_options = a.dim_options;
  if (!a.bottom_mlp.empty()) cfg.bottom_mlp = a.bottom_mlp;
  if (!a.top_mlp.empty()) cfg.top_mlp = a.top_mlp;
  if (!a.bottom_sizes.empty()) cfg.bottom_search.sizes = a.bottom_sizes;
  if (!a.top_sizes.empty()) cfg.top_search.sizes = a.top_sizes;
  if (a.min_layers) cfg.bottom_search.min_layers = cfg.top_search.min_layers = *a.min_layers;
  if (a.max_layers) cfg.bottom_search.max_layers = cfg.top_search.max_layers = *a.max_layers;
  if (a.cost_metric) cfg.metric = dnas::parse_cost_metric(*a.cost_metric);
  if (a.latency_table) cfg.latency_table_path = *a.latency_table;
  if (a.init_seed) cfg.init_seed = *a.init_seed;
  cfg.validate();
  return cfg;
}

int run_train_dnas(TrainDnasArgs& a) {
  if (a.prefix.empty()) a.prefix = a.experiment_id;
  try {
    auto data = load_dataset(a.data);
    Splits splits = split_dataset(data, a.data);
    dnas::DlrmSupernetConfig net_cfg = supernet_config_from(a, *data);

    dnas::SearchConfig cfg;
    cfg.n_total_s_net_training_epochs = a.total_epochs;
    cfg.num_warmup_epochs = a.warmup;
    cfg.n_alt_train_amt = a.alt;
    cfg.arch_sampling = parse_arch_sampling(a.arch_sampling);
    cfg.temperature = {a.init_temp, a.temp_decay};
    cfg.clip_grad_norm_value = a.clip;
    cfg.update_lrs_every_step = a.update_lrs_every_step;
    cfg.loss = {a.use_hw_cost, a.exponential_cost, a.cost_coef, a.cost_exp, a.cost_multiplier};
    cfg.weights_optimizer = a.weights_opt.build();
    cfg.arch_optimizer = a.arch_opt.build();
    cfg.experiment_id = a.experiment_id;
    cfg.logfile = a.logfile.empty() ? dnas::orch::metrics_path(a.prefix) : fs::path(a.logfile);
    cfg.seed = a.seed;
    cfg.log_steps = !a.no_step_log;
    cfg.validate();

    dnas::DlrmSupernet net(net_cfg);
    dnas::data::DataLoader w_loader(splits.wm.weights, a.batch_size, dnas::mix_seed(a.seed, 4));
    dnas::data::DataLoader m_loader(splits.wm.arch, a.batch_size, dnas::mix_seed(a.seed, 5));
    spdlog::info("supernet {} ({}): {} weight rows, {} arch rows", net_cfg.id, dnas::search_group_name(net_cfg.group),
                 splits.wm.weights.size(), splits.wm.arch.size());
    dnas::SearchResult result;
    try {
      result = dnas::train_dnas(net, w_loader, m_loader, cfg);
    } catch (const dnas::DivergenceError& e) {
      spdlog::error("{}", e.what());
      return kExitDiverged;
    }

    json meta{{"supernet_config", json::parse(net_cfg.to_json())},
              {"steps", result.steps},
              {"expected_cost", net.expected_cost()},
              {"sampled", result.sampled.size()}};
    dnas::save_checkpoint(dnas::orch::checkpoint_path(a.prefix), net.weight_parameters(), net.arch_parameters(),
                          meta.dump());
    for (std::size_t k = 0; k < result.sampled.size(); ++k) {
      result.sampled[k].save(dnas::orch::descriptor_path(a.prefix, k));
    }
    touch(dnas::orch::done_path(a.prefix));
    spdlog::info("done: {} steps, {} architectures sampled", result.steps, result.sampled.size());
    return 0;
  } catch (const std::bad_alloc&) {
    spdlog::error("out of memory");
    touch(dnas::orch::oom_path(a.prefix));
    return kExitOom;
  }
}

// ---------------------------------------------------------------------------

struct TrainSampledArgs {
  DataArgs data;
  std::string arch;
  OptimizerArgs opt;
  double epochs = 1.0;
  std::size_t batch_size = 128;
  double clip = 100.0;
  double eval_freq = 1.0;
  std::uint64_t seed = 0;
  std::string experiment_id = "sampled";
  std::string prefix;
  std::string host_slot;
  bool check_test = false;
};

void add_train_sampled(CLI::App& app, TrainSampledArgs& a) {
  auto* c = app.add_subcommand("train-sampled", "train a sampled architecture from scratch");
  a.data.add_to(c);
  c->add_option("--arch", a.arch, "architecture descriptor file")->required();
  a.opt.add_to(c, "");
  c->add_option("--epochs", a.epochs);
  c->add_option("--batch_size", a.batch_size);
  c->add_option("--clip_grad_norm_value", a.clip);
  c->add_option("--eval_freq", a.eval_freq, "validation passes per epoch");
  c->add_option("--seed", a.seed);
  c->add_option("--experiment_id", a.experiment_id);
  c->add_option("--save_metrics_param", a.prefix, "path prefix for every file this job writes");
  c->add_option("--host_gpu_id,--gpu_id", a.host_slot, "worker slot id (informational)");
  c->add_flag("--check_test_set_performance", a.check_test, "evaluate the best-validation weights on the test split");
}

int run_train_sampled(TrainSampledArgs& a) {
  if (a.prefix.empty()) a.prefix = a.experiment_id;
  try {
    const dnas::ArchDescriptor desc = dnas::ArchDescriptor::load(a.arch);
    const dnas::DlrmSupernetConfig base = dnas::DlrmSupernetConfig::from_json(desc.base_config_json);
    auto data = load_dataset(a.data);
    if (data->cardinalities() != base.cardinalities || data->num_dense() != base.num_dense) {
      throw dnas::ConfigError("data shape does not match the descriptor's base config (check --hash_size)");
    }
    Splits splits = split_dataset(data, a.data);
    dnas::Dlrm model = dnas::instantiate_sampled(desc, base, a.seed);

    dnas::SampledTrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.optimizer = a.opt.build();
    cfg.clip_grad_norm_value = a.clip;
    cfg.evals_per_epoch = a.eval_freq;
    cfg.seed = a.seed;
    cfg.metrics_path = dnas::orch::metrics_path(a.prefix);
    cfg.job_id = fs::path(a.prefix).filename().string();
    cfg.efficiency = dnas::efficiency_metric(desc);
    cfg.hyperparameters_json = json{{"arch", a.arch},
                                    {"optimizer", a.opt.kind},
                                    {"lr", a.opt.lr},
                                    {"momentum", a.opt.momentum},
                                    {"lr_schedule", a.opt.schedule},
                                    {"epochs", a.epochs},
                                    {"batch_size", a.batch_size},
                                    {"seed", a.seed}}
                                   .dump();
    dnas::SampledTrainResult r;
    try {
      r = dnas::train_sampled(model, splits.chrono.train, splits.chrono.val, cfg,
                              a.check_test ? &splits.chrono.test : nullptr);
    } catch (const dnas::DivergenceError& e) {
      spdlog::error("{}", e.what());
      return kExitDiverged;
    }
    const auto& best = r.history[r.best];
    spdlog::info("best epoch {:.3f}: val logloss {:.6f}", best.epoch, best.val_logloss);
    if (r.test) spdlog::info("test logloss {:.6f}, calibration {:.4f}", r.test->logloss, r.test->calibration);
    touch(dnas::orch::done_path(a.prefix));
    return 0;
  } catch (const std::bad_alloc&) {
    spdlog::error("out of memory");
    touch(dnas::orch::oom_path(a.prefix));
    return kExitOom;
  }
}

// ---------------------------------------------------------------------------

struct TuneArgs {
  std::string config;
  std::string experiment_id;
  std::string out_dir = ".";
  std::size_t phase = 0;
  std::string arch;
  std::string extra_args;
  std::string report;
};

void add_tune(CLI::App& app, TuneArgs& a) {
  auto* c = app.add_subcommand("tune", "expand a job grid and run it on worker slots");
  c->add_option("config", a.config, "tuning config file")->required();
  c->add_option("--experiment_id", a.experiment_id)->required();
  c->add_option("--out_dir", a.out_dir);
  c->add_option("--phase", a.phase, "EPOCH_EVAL_FREQ entry used for EVAL_FREQ_PARAM (0 or 1)");
  c->add_option("--arch", a.arch, "descriptor substituted for ARCH_PARAM");
  c->add_option("--extra_args", a.extra_args, "appended to every job");
  c->add_option("--report", a.report, "write the execution report as JSON");
}

int run_tune(const TuneArgs& a) {
  namespace o = dnas::orch;
  const o::JobTemplate t = o::parse_config_file(a.config);
  fs::create_directories(a.out_dir);
  o::ensure_fresh_experiment(a.out_dir, a.experiment_id);
  o::ExpandOptions e;
  e.out_dir = a.out_dir;
  e.extra_args = a.extra_args;
  e.arch_path = a.arch;
  if (a.phase < t.eval_freqs.size()) e.eval_freq = t.eval_freqs[a.phase];
  const auto jobs = o::expand_jobs(t, a.experiment_id, e);
  spdlog::info("{} jobs on {} slots x {}", jobs.size(), t.slots.size(), t.jobs_per_slot);
  const o::ExecutionReport r = o::schedule(jobs, t.slots, t.jobs_per_slot);
  if (!a.report.empty()) std::ofstream(a.report) << r.to_json() << '\n';
  std::cout << r.completed() << " done, " << r.failed() << " failed, max concurrency " << r.max_concurrency << '\n';
  return r.failed() == 0 ? 0 : kExitError;
}

struct PipelineArgs {
  std::string dnas_config, sampled_config;
  std::string experiment_id = "pipeline";
  std::string out_dir = ".";
  std::string data_args;
  std::string report;
};

void add_pipeline(CLI::App& app, PipelineArgs& a) {
  auto* c = app.add_subcommand("run-pipeline", "supernet jobs, then every sampled architecture x the sampled grid");
  c->add_option("--dnas_config", a.dnas_config)->required();
  c->add_option("--sampled_config", a.sampled_config)->required();
  c->add_option("--experiment_id", a.experiment_id);
  c->add_option("--out_dir", a.out_dir);
  c->add_option("--data_args", a.data_args, "appended to every job, e.g. \"--data x.tsv --cache x.bin\"");
  c->add_option("--report", a.report, "write both execution reports as JSON");
}

int run_pipeline_cmd(const PipelineArgs& a) {
  namespace o = dnas::orch;
  o::PipelineOptions opts;
  opts.out_dir = a.out_dir;
  opts.experiment_id = a.experiment_id;
  opts.data_args = a.data_args;
  const o::PipelineReport r = o::run_pipeline(a.dnas_config, a.sampled_config, opts);
  if (!a.report.empty()) {
    json j{{"supernet_phase", json::parse(r.supernet_phase.to_json())}, {"descriptors", json::array()}};
    for (const auto& d : r.descriptors) j["descriptors"].push_back(d.string());
    j["sampled_phase"] = r.sampled_phase ? json::parse(r.sampled_phase->to_json()) : json(nullptr);
    std::ofstream(a.report) << j.dump(2) << '\n';
  }
  std::cout << "supernet jobs: " << r.supernet_phase.completed() << " done, " << r.supernet_phase.failed()
            << " failed; descriptors: " << r.descriptors.size();
  if (r.sampled_phase) {
    std::cout << "; sampled jobs: " << r.sampled_phase->completed() << " done, " << r.sampled_phase->failed()
              << " failed";
  }
  std::cout << '\n';
  const bool ok = !r.sampled_phase || r.sampled_phase->completed() > 0;
  return ok ? 0 : kExitError;
}

// ---------------------------------------------------------------------------

int run_heatmap(const std::string& checkpoint, const std::string& out) {
  const auto rows = dnas::orch::export_heatmap(checkpoint, out);
  if (out.empty()) {
    for (const auto& r : rows) {
      std::cout << r.name;
      for (double p : r.probs) std::cout << ',' << p;
      std::cout << '\n';
    }
  }
  return 0;
}

int run_aggregate(const std::string& dir, const std::string& out) {
  const auto summary = dnas::orch::aggregate_results(dir);
  if (out.empty()) {
    std::cout << summary.to_json() << '\n';
  } else {
    std::ofstream(out) << summary.to_json() << '\n';
  }
  if (summary.skipped_files > 0) spdlog::warn("{} malformed result files skipped", summary.skipped_files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DNAS for recommendation models: supernet search, sampled training, sweeps"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log_level", log_level, "trace | debug | info | warn | error | off");

  TrainDnasArgs dnas_args;
  add_train_dnas(app, dnas_args);
  TrainSampledArgs sampled_args;
  add_train_sampled(app, sampled_args);
  TuneArgs tune_args;
  add_tune(app, tune_args);
  PipelineArgs pipeline_args;
  add_pipeline(app, pipeline_args);

  std::string checkpoint, heatmap_out;
  auto* heat = app.add_subcommand("export-heatmap", "softmax(theta) per decision point as CSV");
  heat->add_option("checkpoint", checkpoint)->required();
  heat->add_option("--out", heatmap_out, "CSV path (stdout if omitted)");

  std::string agg_dir, agg_out;
  auto* agg = app.add_subcommand("aggregate", "best-epoch rows and min/mean/median/max over a result directory");
  agg->add_option("dir", agg_dir)->required();
  agg->add_option("--out", agg_out, "JSON path (stdout if omitted)");

  std::string synth_out;
  dnas::data::CriteoSynthSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "write a synthetic Criteo-format TSV");
  synth->add_option("out", synth_out)->required();
  synth->add_option("--records", synth_spec.num_records);
  synth->add_option("--positive_rate", synth_spec.target_positive_rate);
  synth->add_option("--seed", synth_spec.seed);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (app.got_subcommand("train-dnas")) return run_train_dnas(dnas_args);
    if (app.got_subcommand("train-sampled")) return run_train_sampled(sampled_args);
    if (app.got_subcommand("tune")) return run_tune(tune_args);
    if (app.got_subcommand("run-pipeline")) return run_pipeline_cmd(pipeline_args);
    if (app.got_subcommand("export-heatmap")) return run_heatmap(checkpoint, heatmap_out);
    if (app.got_subcommand("aggregate")) return run_aggregate(agg_dir, agg_out);
    if (app.got_subcommand("synth")) {
      dnas::data::write_synthetic_criteo(synth_out, synth_spec);
      return 0;
    }
  } catch (const dnas::Error& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return kExitError;
  }
  return kExitError;
}
