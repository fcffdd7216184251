#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dnas/autograd/tensor.hpp"

namespace dnas::ag {

enum class Activation { kNone, kRelu, kSigmoid };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

/// y = act(x W + b) for x [batch x in], W [in x out], b [out].
Tensor fc_layer(const Tensor& x, const Tensor& weight, const Tensor& bias, Activation act);

/// Row gather from table [card x dim]; backward scatter-adds into the rows.
Tensor embedding_lookup(const Tensor& table, std::span<const std::int64_t> indices);

/// Stacks n tensors of shape [batch x d] into [batch x n x d].
Tensor stack_features(const std::vector<Tensor>& features);

/// Flattened upper triangle of F F^T per batch element, row-major over (i < j),
/// or (i <= j) when include_diag. F is [batch x n x d].
Tensor dot_interactions(const Tensor& features, bool include_diag);

/// Concatenates [batch x k_i] tensors along columns.
Tensor concat_columns(const std::vector<Tensor>& parts);

/// Mean binary cross-entropy; probabilities are clamped to [eps, 1 - eps].
Tensor bce_loss(const Tensor& probs, std::span<const double> labels);

inline constexpr double kProbEpsilon = 1e-7;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor log(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Softmax over a rank-1 tensor.
Tensor softmax(const Tensor& logits);

/// Column means of a [rows x cols] tensor -> [cols].
Tensor mean_rows(const Tensor& a);

/// Scalar sum_i a_i * coeffs_i.
Tensor dot_const(const Tensor& a, std::span<const double> coeffs);

/// Zeroes columns [keep, cols) of a [rows x cols] tensor.
Tensor truncate_columns(const Tensor& a, std::size_t keep);

/// Pads [rows x cols] with zero columns up to width.
Tensor pad_columns(const Tensor& a, std::size_t width);

}  // namespace dnas::ag
