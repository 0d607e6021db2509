#pragma once

#include <vector>

#include "nowcast/buckets.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

// Losses return the raw weighted sum plus the total applied weight so that
// gradient accumulation can normalize once per optimizer step; value() is the
// normalized loss for logging. Gradients are w.r.t. the *sum*, so dividing
// accumulated gradients by the accumulated weight reproduces the effect of a
// single large batch.
template <typename T>
struct LossResult {
    double sum = 0.0;
    double weight = 0.0;
    TensorT<T> dlogits;

    double value() const { return weight > 0.0 ? sum / weight : 0.0; }
};

// Class-weighted cross-entropy over logits [B, T'*K, H, W] against class ids
// [B, T', H, W], restricted to valid pixels. Per-pixel contribution is
// w_y * (-log softmax_y); the normalizer is the sum of applied weights.
// Throws when no valid pixel remains.
template <typename T>
LossResult<T> weighted_cross_entropy(const TensorT<T>& logits, const TensorT<std::uint8_t>& classes,
                                     const Mask& valid, const std::vector<double>& weights,
                                     bool want_grad = true);

// Mean squared error between rate grids over valid pixels (weight = count).
template <typename T>
LossResult<T> mse_loss(const TensorT<T>& pred_rates, const TensorT<T>& target_rates,
                       const Mask& valid);

// MSE on expected-value-decoded rates, differentiated through the softmax and
// the decode, for regression-style training of the classification head.
template <typename T>
LossResult<T> mse_decoded_loss(const TensorT<T>& logits, const Tensor& target_rates,
                               const Mask& valid, const BucketScale& scale, bool want_grad = true);

}  // namespace nowcast
