#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnas/autograd/tensor.hpp"
#include "dnas/random.hpp"

namespace dnas::testing {

// Central differences against the tape. Error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-4;
  std::size_t max_coords_per_leaf = 0;  // 0 checks every coordinate
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
};

GradCheckResult gradient_check(const std::function<ag::Tensor()>& loss, const std::vector<ag::Tensor>& leaves,
                               Rng& rng, const GradCheckOptions& options = {});

struct GradCase {
  std::string name;
  // Builds one random instance; returns the loss closure and its leaves.
  std::function<void(Rng&, std::function<ag::Tensor()>&, std::vector<ag::Tensor>&)> make;
  GradCheckOptions options;
};

// Every differentiable op plus every supernet forward (weights and theta).
std::vector<GradCase> gradient_cases();

struct GradSuiteRow {
  std::string name;
  std::size_t instances = 0;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
};

std::vector<GradSuiteRow> run_gradient_suite(std::size_t instances, std::uint64_t seed);

}  // namespace dnas::testing
