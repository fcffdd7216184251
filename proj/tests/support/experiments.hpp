#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dnas/search.hpp"

namespace dnas::testing {

// Cardinality search on a two-feature synthetic set: feature 0 carries a
// per-category effect over all of its ids, feature 1 is pure noise.
struct RecoverySettings {
  std::size_t num_records = 100000;
  std::size_t cardinality = 1000;
  double effect_scale = 1.0;
  std::size_t embedding_dim = 4;
  std::size_t batch_size = 128;
  double epochs = 4.0;
  double warmup = 1.0;
  double alt = 0.5;
  double init_temp = 1.0;
  double temp_decay = 0.5;
  double cost_coef = 0.01;
  double weights_lr = 0.01;
  double arch_lr = 0.01;
};

struct RecoveryOutcome {
  double signal_full_prob = 0.0;
  double signal_expected_card = 0.0;
  double noise_expected_card = 0.0;
  double seconds = 0.0;

  bool recovered() const { return signal_full_prob >= 0.6 && noise_expected_card < signal_expected_card; }
};

RecoveryOutcome run_card_recovery(std::uint64_t seed, const std::filesystem::path& logfile,
                                  const RecoverySettings& s = {});

// MLP search with dense-only signal; compares cost pressure settings.
struct MlpPressureSettings {
  std::size_t num_records = 30000;
  std::size_t num_dense = 8;
  std::size_t batch_size = 128;
  double epochs = 3.0;
  double warmup = 1.0;
  double alt = 0.5;
  double init_temp = 1.0;
  double temp_decay = 0.5;
  double weights_lr = 0.01;
  double arch_lr = 0.01;
  std::size_t samples = 8;
};

struct MlpPressureOutcome {
  double mean_sampled_flops = 0.0;
  double final_task_loss = 0.0;  // mean over the last architecture segment (held-out X_theta rows)
  double seconds = 0.0;
};

MlpPressureOutcome run_mlp_pressure(std::uint64_t seed, double cost_coef, const MlpPressureSettings& s = {});

}  // namespace dnas::testing
