#include "dnas/supernet.hpp"

#include <algorithm>
#include <cmath>

#include "dnas/errors.hpp"

namespace dnas {

void TemperatureSchedule::validate() const {
  if (!(initial > 0.0)) throw ConfigError("initial temperature must be positive");
  if (!(decay >= 0.0)) throw ConfigError("temperature decay must be nonnegative");
}

double temperature(const TemperatureSchedule& schedule, double epoch) {
  return schedule.initial * std::exp(-schedule.decay * epoch);
}

ag::Tensor gumbel_softmax(const ag::Tensor& theta, std::span<const double> noise, std::size_t batch,
                          double tau) {
  if (!(tau > 0.0)) throw DomainError("Gumbel softmax temperature must be positive, got " + std::to_string(tau));
  if (theta.rank() != 1 || theta.size() == 0) {
    throw DimensionError("gumbel_softmax: theta must be a nonempty vector, got " +
                         ag::shape_string(theta.shape()));
  }
  const std::size_t n = theta.size();
  if (noise.size() != batch * n) {
    throw DimensionError("gumbel_softmax: noise has " + std::to_string(noise.size()) +
                         " entries for batch " + std::to_string(batch) + " x " + std::to_string(n));
  }
  auto th = theta.values();
  std::vector<double> m(batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = m.data() + b * n;
    double zmax = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = (th[i] + noise[b * n + i]) / tau;
      zmax = std::max(zmax, row[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += row[i] = std::exp(row[i] - zmax);
    for (std::size_t i = 0; i < n; ++i) row[i] /= total;
  }
  return ag::make_result({batch, n}, std::move(m), {theta},
                         [batch, n, tau](const ag::BackwardContext& ctx) {
                           auto g = ctx.input_grad(0);
                           auto m = ctx.out_value();
                           auto go = ctx.out_grad();
                           for (std::size_t b = 0; b < batch; ++b) {
                             const double* mr = m.data() + b * n;
                             const double* gr = go.data() + b * n;
                             double dot = 0.0;
                             for (std::size_t i = 0; i < n; ++i) dot += gr[i] * mr[i];
                             for (std::size_t i = 0; i < n; ++i) g[i] += mr[i] * (gr[i] - dot) / tau;
                           }
                         },
                         "gumbel_softmax");
}

SampleWeights soft_sample(const ag::Tensor& theta, std::size_t batch, const SamplingContext& ctx) {
  if (!(ctx.tau > 0.0)) throw DomainError("soft_sample: temperature must be positive");
  const std::size_t n = theta.size();
  std::vector<double> noise(batch * n, 0.0);
  if (!ctx.zero_noise) {
    if (ctx.rng == nullptr) throw Error("soft_sample: no random stream in sampling context");
    for (double& g : noise) g = ctx.rng->gumbel();
  }
  return {gumbel_softmax(theta, noise, batch, ctx.tau), ctx.tau};
}

HardSample hard_sample(std::span<const double> theta, Rng& rng) {
  if (theta.empty()) throw DimensionError("hard_sample: theta is empty");
  HardSample out;
  double best = -INFINITY;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double score = theta[i] + rng.gumbel();
    if (score > best) {
      best = score;
      out.index = i;
    }
  }
  out.one_hot.assign(theta.size(), 0.0);
  out.one_hot[out.index] = 1.0;
  return out;
}

ag::Tensor weighted_sum(const SampleWeights& weights, const std::vector<ag::Tensor>& mats) {
  const ag::Tensor& w = weights.weights;
  if (w.rank() != 2) throw DimensionError("weighted_sum: weights must be [batch x n]");
  const std::size_t batch = w.dim(0), n = w.dim(1);
  if (mats.size() != n) {
    throw DimensionError("weighted_sum: " + std::to_string(mats.size()) + " operator outputs for " +
                         std::to_string(n) + " weights");
  }
  const ag::Shape& shape = mats.front().shape();
  for (const auto& m : mats) {
    if (m.shape() != shape) {
      throw DimensionError("weighted_sum: operator output shapes differ: " + ag::shape_string(shape) +
                           " vs " + ag::shape_string(m.shape()));
    }
  }
  if (shape.empty() || shape[0] != batch) {
    throw DimensionError("weighted_sum: operator output " + ag::shape_string(shape) +
                         " does not lead with batch " + std::to_string(batch));
  }
  const std::size_t row = ag::numel(shape) / batch;
  auto wv = w.values();
  std::vector<double> out(ag::numel(shape), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto mv = mats[i].values();
    for (std::size_t b = 0; b < batch; ++b) {
      const double wbi = wv[b * n + i];
      if (wbi == 0.0) continue;
      for (std::size_t k = 0; k < row; ++k) out[b * row + k] += wbi * mv[b * row + k];
    }
  }
  std::vector<ag::Tensor> inputs;
  inputs.reserve(n + 1);
  inputs.push_back(w);
  inputs.insert(inputs.end(), mats.begin(), mats.end());
  return ag::make_result(shape, std::move(out), std::move(inputs),
                         [batch, n, row](const ag::BackwardContext& ctx) {
                           auto go = ctx.out_grad();
                           auto wv = ctx.input_value(0);
                           auto gw = ctx.input_grad(0);
                           for (std::size_t i = 0; i < n; ++i) {
                             auto mv = ctx.input_value(i + 1);
                             auto gm = ctx.input_grad(i + 1);
                             for (std::size_t b = 0; b < batch; ++b) {
                               const double* gr = go.data() + b * row;
                               if (!gw.empty()) {
                                 double acc = 0.0;
                                 const double* mr = mv.data() + b * row;
                                 for (std::size_t k = 0; k < row; ++k) acc += gr[k] * mr[k];
                                 gw[b * n + i] += acc;
                               }
                               if (!gm.empty()) {
                                 const double wbi = wv[b * n + i];
                                 double* gmr = gm.data() + b * row;
                                 for (std::size_t k = 0; k < row; ++k) gmr[k] += wbi * gr[k];
                               }
                             }
                           }
                         },
                         "weighted_sum");
}

std::size_t ThetaParams::add(std::string name, std::size_t num_options) {
  if (num_options == 0) throw ConfigError("decision point '" + name + "' has no options");
  thetas_.push_back({std::move(name), ag::Tensor::zeros({num_options}, true)});
  return thetas_.size() - 1;
}

}  // namespace dnas
