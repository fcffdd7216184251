#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dnas/autograd/tensor.hpp"
#include "dnas/random.hpp"

namespace dnas {

struct NamedTensor {
  std::string name;
  ag::Tensor tensor;
};

struct TemperatureSchedule {
  double initial = 1.0;  // T0
  double decay = 0.0;    // eta

  void validate() const;
};

/// T0 * exp(-eta * epoch); epoch may be fractional.
double temperature(const TemperatureSchedule& schedule, double epoch);

/// Per-forward sampling state threaded through every supernet layer.
struct SamplingContext {
  double tau = 1.0;
  Rng* rng = nullptr;
  // Test hook: draw no Gumbel noise, so soft samples reduce to softmax(theta / tau).
  bool zero_noise = false;
};

/// Per-example operator weights m[batch][n] for one decision point.
struct SampleWeights {
  ag::Tensor weights;  // [batch x n]
  double tau = 1.0;

  std::size_t batch() const { return weights.dim(0); }
  std::size_t options() const { return weights.dim(1); }
};

/// Differentiable Gumbel softmax of theta [n] with explicit noise [batch x n].
ag::Tensor gumbel_softmax(const ag::Tensor& theta, std::span<const double> noise, std::size_t batch,
                          double tau);

/// Draws fresh Gumbel noise per row (unless ctx.zero_noise) and soft-samples.
SampleWeights soft_sample(const ag::Tensor& theta, std::size_t batch, const SamplingContext& ctx);

struct HardSample {
  std::size_t index = 0;
  std::vector<double> one_hot;
};

/// argmax(theta + g) with g ~ Gumbel(0, 1); selects i with probability softmax(theta)_i.
HardSample hard_sample(std::span<const double> theta, Rng& rng);

/// Per-example sum_i m[b][i] * mats[i][b, ...]; every mat shares one shape whose
/// leading dimension is the batch.
ag::Tensor weighted_sum(const SampleWeights& weights, const std::vector<ag::Tensor>& mats);

/// Architecture logits, one learnable vector per decision point.
class ThetaParams {
 public:
  /// Adds a zero-initialised decision point and returns its index.
  std::size_t add(std::string name, std::size_t num_options);

  std::size_t size() const { return thetas_.size(); }
  const ag::Tensor& operator[](std::size_t i) const { return thetas_[i].tensor; }
  ag::Tensor& operator[](std::size_t i) { return thetas_[i].tensor; }
  const std::string& name(std::size_t i) const { return thetas_[i].name; }
  const std::vector<NamedTensor>& named() const { return thetas_; }

 private:
  std::vector<NamedTensor> thetas_;
};

}  // namespace dnas
