#include "dnas/autograd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnas/errors.hpp"

namespace dnas::ag {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, const char* name, Forward f, Derivative df) {
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), {a},
                     [df](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto x = ctx.input_value(0);
                       auto y = ctx.out_value();
                       auto go = ctx.out_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * df(x[i], y[i]);
                     },
                     name);
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "none") return Activation::kNone;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "none";
}

Tensor fc_layer(const Tensor& x, const Tensor& weight, const Tensor& bias, Activation act) {
  require_rank(x, 2, "fc_layer");
  require_rank(weight, 2, "fc_layer");
  require_rank(bias, 1, "fc_layer");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != out) {
    throw DimensionError("fc_layer: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()) + " and bias " + shape_string(bias.shape()));
  }
  auto xv = x.values();
  auto wv = weight.values();
  auto bv = bias.values();
  std::vector<double> y(batch * out);
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = y.data() + r * out;
    std::copy(bv.begin(), bv.end(), yr);
    const double* xr = xv.data() + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      const double* wi = wv.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
    switch (act) {
      case Activation::kNone: break;
      case Activation::kRelu:
        for (std::size_t o = 0; o < out; ++o) yr[o] = yr[o] > 0.0 ? yr[o] : 0.0;
        break;
      case Activation::kSigmoid:
        for (std::size_t o = 0; o < out; ++o) yr[o] = sigmoid_scalar(yr[o]);
        break;
    }
  }
  return make_result(
      {batch, out}, std::move(y), {x, weight, bias},
      [batch, in, out, act](const BackwardContext& ctx) {
        auto go = ctx.out_grad();
        auto yv = ctx.out_value();
        std::vector<double> dz(go.begin(), go.end());
        if (act == Activation::kRelu) {
          for (std::size_t k = 0; k < dz.size(); ++k)
            if (yv[k] <= 0.0) dz[k] = 0.0;
        } else if (act == Activation::kSigmoid) {
          for (std::size_t k = 0; k < dz.size(); ++k) dz[k] *= yv[k] * (1.0 - yv[k]);
        }
        auto xv = ctx.input_value(0);
        auto wv = ctx.input_value(1);
        auto gx = ctx.input_grad(0);
        auto gw = ctx.input_grad(1);
        auto gb = ctx.input_grad(2);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* dzr = dz.data() + r * out;
          const double* xr = xv.data() + r * in;
          if (!gb.empty())
            for (std::size_t o = 0; o < out; ++o) gb[o] += dzr[o];
          for (std::size_t i = 0; i < in; ++i) {
            const double* wi = wv.data() + i * out;
            if (!gw.empty() && xr[i] != 0.0) {
              double* gwi = gw.data() + i * out;
              const double xi = xr[i];
              for (std::size_t o = 0; o < out; ++o) gwi[o] += xi * dzr[o];
            }
            if (!gx.empty()) {
              double acc = 0.0;
              for (std::size_t o = 0; o < out; ++o) acc += dzr[o] * wi[o];
              gx[r * in + i] += acc;
            }
          }
        }
      },
      "fc_layer");
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::int64_t> indices) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t card = table.dim(0), dim = table.dim(1);
  for (std::int64_t idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= card) throw BoundsError(idx, card);
  }
  auto tv = table.values();
  std::vector<double> out(indices.size() * dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(tv.data() + static_cast<std::size_t>(indices[r]) * dim, dim, out.data() + r * dim);
  }
  std::vector<std::int64_t> rows(indices.begin(), indices.end());
  return make_result({indices.size(), dim}, std::move(out), {table},
                     [rows = std::move(rows), dim](const BackwardContext& ctx) {
                       auto gt = ctx.input_grad(0);
                       auto go = ctx.out_grad();
                       for (std::size_t r = 0; r < rows.size(); ++r) {
                         double* dst = gt.data() + static_cast<std::size_t>(rows[r]) * dim;
                         const double* src = go.data() + r * dim;
                         for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
                       }
                     },
                     "embedding_lookup");
}

Tensor stack_features(const std::vector<Tensor>& features) {
  if (features.empty()) throw DimensionError("stack_features: no inputs");
  for (const auto& f : features) {
    require_rank(f, 2, "stack_features");
    require_same_shape(features.front(), f, "stack_features");
  }
  const std::size_t n = features.size();
  const std::size_t batch = features[0].dim(0), d = features[0].dim(1);
  std::vector<double> out(batch * n * d);
  for (std::size_t k = 0; k < n; ++k) {
    auto fv = features[k].values();
    for (std::size_t r = 0; r < batch; ++r) {
      std::copy_n(fv.data() + r * d, d, out.data() + (r * n + k) * d);
    }
  }
  return make_result({batch, n, d}, std::move(out), features,
                     [n, batch, d](const BackwardContext& ctx) {
                       auto go = ctx.out_grad();
                       for (std::size_t k = 0; k < n; ++k) {
                         auto g = ctx.input_grad(k);
                         if (g.empty()) continue;
                         for (std::size_t r = 0; r < batch; ++r) {
                           const double* src = go.data() + (r * n + k) * d;
                           double* dst = g.data() + r * d;
                           for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                         }
                       }
                     },
                     "stack_features");
}

Tensor dot_interactions(const Tensor& features, bool include_diag) {
  require_rank(features, 3, "dot_interactions");
  const std::size_t batch = features.dim(0), n = features.dim(1), d = features.dim(2);
  if (d < 1 || n < 1) throw DimensionError("dot_interactions: empty feature matrix");
  const std::size_t k = include_diag ? n * (n + 1) / 2 : n * (n - 1) / 2;
  auto fv = features.values();
  std::vector<double> out(batch * k);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* f = fv.data() + r * n * d;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = include_diag ? i : i + 1; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < d; ++t) acc += f[i * d + t] * f[j * d + t];
        out[r * k + c++] = acc;
      }
    }
  }
  return make_result({batch, k}, std::move(out), {features},
                     [batch, n, d, k, include_diag](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto fv = ctx.input_value(0);
                       auto go = ctx.out_grad();
                       for (std::size_t r = 0; r < batch; ++r) {
                         const double* f = fv.data() + r * n * d;
                         double* gf = g.data() + r * n * d;
                         std::size_t c = 0;
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = include_diag ? i : i + 1; j < n; ++j) {
                             const double gij = go[r * k + c++];
                             if (gij == 0.0) continue;
                             for (std::size_t t = 0; t < d; ++t) {
                               gf[i * d + t] += gij * f[j * d + t];
                               gf[j * d + t] += gij * f[i * d + t];
                             }
                           }
                         }
                       }
                     },
                     "dot_interactions");
}

Tensor concat_columns(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_columns: no inputs");
  const std::size_t batch = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_columns");
    if (p.dim(0) != batch) {
      throw DimensionError("concat_columns: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(batch * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t r = 0; r < batch; ++r) {
      std::copy_n(pv.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  return make_result({batch, total}, std::move(out), parts,
                     [widths, batch, total](const BackwardContext& ctx) {
                       auto go = ctx.out_grad();
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto g = ctx.input_grad(k);
                         if (!g.empty()) {
                           for (std::size_t r = 0; r < batch; ++r)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[r * widths[k] + j] += go[r * total + offset + j];
                         }
                         offset += widths[k];
                       }
                     },
                     "concat_columns");
}

Tensor bce_loss(const Tensor& probs, std::span<const double> labels) {
  if (probs.size() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(probs.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DimensionError("bce_loss: empty batch");
  auto p = probs.values();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw DomainError("bce_loss: probability " + std::to_string(p[i]) + " outside (0, 1)");
    }
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DomainError("bce_loss: label " + std::to_string(labels[i]) + " is not binary");
    }
    const double pc = std::clamp(p[i], kProbEpsilon, 1.0 - kProbEpsilon);
    total -= labels[i] * std::log(pc) + (1.0 - labels[i]) * std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  std::vector<double> y(labels.begin(), labels.end());
  return make_result({}, {total / n}, {probs},
                     [y = std::move(y), n](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto p = ctx.input_value(0);
                       const double go = ctx.out_grad()[0];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double pc = std::clamp(p[i], kProbEpsilon, 1.0 - kProbEpsilon);
                         g[i] += go * (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc)) / n;
                       }
                     },
                     "bce_loss");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const BackwardContext& ctx) {
                       auto go = ctx.out_grad();
                       for (std::size_t k = 0; k < 2; ++k) {
                         auto g = ctx.input_grad(k);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
                       }
                     },
                     "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const BackwardContext& ctx) {
                       auto go = ctx.out_grad();
                       auto ga = ctx.input_grad(0);
                       auto gb = ctx.input_grad(1);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
                     },
                     "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const BackwardContext& ctx) {
                       auto go = ctx.out_grad();
                       auto av = ctx.input_value(0);
                       auto bv = ctx.input_value(1);
                       auto ga = ctx.input_grad(0);
                       auto gb = ctx.input_grad(1);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
                     },
                     "mul");
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, "add_scalar", [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw DomainError("log of nonpositive value " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor pow(const Tensor& a, double exponent) {
  return unary(a, "pow", [exponent](double x) { return std::pow(x, exponent); },
               [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result({}, {total}, {a},
                     [](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       const double go = ctx.out_grad()[0];
                       for (double& v : g) v += go;
                     },
                     "sum");
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a},
                     [](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto go = ctx.out_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
                     },
                     "reshape");
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax");
  auto z = logits.values();
  if (z.empty()) throw DimensionError("softmax of empty vector");
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> s(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += s[i] = std::exp(z[i] - zmax);
  for (double& v : s) v /= total;
  return make_result(logits.shape(), std::move(s), {logits},
                     [](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto s = ctx.out_value();
                       auto go = ctx.out_grad();
                       double dot = 0.0;
                       for (std::size_t i = 0; i < s.size(); ++i) dot += go[i] * s[i];
                       for (std::size_t i = 0; i < s.size(); ++i) g[i] += s[i] * (go[i] - dot);
                     },
                     "softmax");
}

Tensor mean_rows(const Tensor& a) {
  require_rank(a, 2, "mean_rows");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (rows == 0) throw DimensionError("mean_rows of empty tensor");
  std::vector<double> out(cols, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += av[r * cols + c];
  for (double& v : out) v /= static_cast<double>(rows);
  return make_result({cols}, std::move(out), {a},
                     [rows, cols](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto go = ctx.out_grad();
                       const double inv = 1.0 / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += go[c] * inv;
                     },
                     "mean_rows");
}

Tensor dot_const(const Tensor& a, std::span<const double> coeffs) {
  if (coeffs.size() != a.size()) {
    throw DimensionError("dot_const: " + std::to_string(coeffs.size()) + " coefficients for " +
                         shape_string(a.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) total += a.values()[i] * coeffs[i];
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return make_result({}, {total}, {a},
                     [c = std::move(c)](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       const double go = ctx.out_grad()[0];
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * c[i];
                     },
                     "dot_const");
}

Tensor truncate_columns(const Tensor& a, std::size_t keep) {
  require_rank(a, 2, "truncate_columns");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  keep = std::min(keep, cols);
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(r * cols + keep),
              out.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols), 0.0);
  return make_result(a.shape(), std::move(out), {a},
                     [rows, cols, keep](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto go = ctx.out_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < keep; ++c) g[r * cols + c] += go[r * cols + c];
                     },
                     "truncate_columns");
}

Tensor pad_columns(const Tensor& a, std::size_t width) {
  require_rank(a, 2, "pad_columns");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (width < cols) {
    throw DimensionError("pad_columns: cannot pad " + shape_string(a.shape()) + " to width " +
                         std::to_string(width));
  }
  if (width == cols) return a;
  std::vector<double> out(rows * width, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.data() + r * cols, cols, out.data() + r * width);
  return make_result({rows, width}, std::move(out), {a},
                     [rows, cols, width](const BackwardContext& ctx) {
                       auto g = ctx.input_grad(0);
                       auto go = ctx.out_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += go[r * width + c];
                     },
                     "pad_columns");
}

}  // namespace dnas::ag
