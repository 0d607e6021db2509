#include "nowcast/loss.hpp"

#include <algorithm>
#include <cmath>

namespace nowcast {

namespace {

struct PartialSums {
    double sum = 0.0;
    double weight = 0.0;
};

}  // namespace

template <typename T>
LossResult<T> weighted_cross_entropy(const TensorT<T>& logits, const TensorT<std::uint8_t>& classes,
                                     const Mask& valid, const std::vector<double>& weights,
                                     bool want_grad) {
    if (logits.rank() != 4) throw DataError("cross_entropy: logits must be [B, T*K, H, W]");
    const long k = static_cast<long>(weights.size());
    if (k < 2 || logits.dim(1) % k != 0)
        throw DataError("cross_entropy: channel count not divisible by class count");
    const long b = logits.dim(0), t_out = logits.dim(1) / k;
    const long h = logits.dim(2), w = logits.dim(3);
    require_shape(classes, {b, t_out, h, w}, "cross_entropy classes");
    require_shape(valid, {b, t_out, h, w}, "cross_entropy mask");
    for (double wt : weights)
        if (!(wt > 0.0)) throw DataError("cross_entropy: class weights must be positive");

    LossResult<T> res;
    if (want_grad) res.dlogits = TensorT<T>(logits.shape());
    const long hw = h * w;
    const long rows = b * t_out * h;
    // fixed-size partials reduced in row order keep the result deterministic
    std::vector<PartialSums> partials(static_cast<std::size_t>(rows));

#pragma omp parallel for schedule(static)
    for (long row = 0; row < rows; ++row) {
        const long bt = row / h, i = row % h;
        const long bi = bt / t_out, t = bt % t_out;
        const T* z = logits.data() + ((bi * t_out + t) * k) * hw + i * w;
        const std::uint8_t* cls = classes.data() + bt * hw + i * w;
        const std::uint8_t* msk = valid.data() + bt * hw + i * w;
        T* dz = want_grad ? res.dlogits.data() + ((bi * t_out + t) * k) * hw + i * w : nullptr;
        PartialSums ps;
        for (long j = 0; j < w; ++j) {
            if (!msk[j]) continue;
            const long y = cls[j];
            if (y >= k) continue;  // unreachable for well-formed classes
            T m = z[j];
            for (long c = 1; c < k; ++c) m = std::max(m, z[c * hw + j]);
            double sum_exp = 0.0;
            for (long c = 0; c < k; ++c) sum_exp += std::exp(double(z[c * hw + j] - m));
            const double lse = double(m) + std::log(sum_exp);
            const double wy = weights[static_cast<std::size_t>(y)];
            ps.sum += wy * (lse - double(z[y * hw + j]));
            ps.weight += wy;
            if (want_grad) {
                const double inv = 1.0 / sum_exp;
                for (long c = 0; c < k; ++c) {
                    double p = std::exp(double(z[c * hw + j] - m)) * inv;
                    dz[c * hw + j] = static_cast<T>(wy * (p - (c == y ? 1.0 : 0.0)));
                }
            }
        }
        partials[static_cast<std::size_t>(row)] = ps;
    }
    for (const auto& ps : partials) {
        res.sum += ps.sum;
        res.weight += ps.weight;
    }
    if (res.weight <= 0.0)
        throw DataError("cross_entropy: no valid pixels in batch (filter before the loss)");
    return res;
}

template <typename T>
LossResult<T> mse_loss(const TensorT<T>& pred_rates, const TensorT<T>& target_rates,
                       const Mask& valid) {
    if (!pred_rates.same_shape(target_rates) || pred_rates.shape() != valid.shape())
        throw DataError("mse: shape mismatch");
    LossResult<T> res;
    for (std::size_t i = 0; i < pred_rates.size(); ++i) {
        if (!valid[i]) continue;
        const double d = double(pred_rates[i]) - double(target_rates[i]);
        res.sum += d * d;
        res.weight += 1.0;
    }
    if (res.weight <= 0.0) throw DataError("mse: no valid pixels");
    return res;
}

template <typename T>
LossResult<T> mse_decoded_loss(const TensorT<T>& logits, const Tensor& target_rates,
                               const Mask& valid, const BucketScale& scale, bool want_grad) {
    const long k = scale.num_classes();
    if (logits.rank() != 4 || logits.dim(1) % k != 0)
        throw DataError("mse_decoded: logits must be [B, T*K, H, W]");
    const long b = logits.dim(0), t_out = logits.dim(1) / k;
    const long h = logits.dim(2), w = logits.dim(3);
    require_shape(target_rates, {b, t_out, h, w}, "mse_decoded target");
    require_shape(valid, {b, t_out, h, w}, "mse_decoded mask");

    LossResult<T> res;
    if (want_grad) res.dlogits = TensorT<T>(logits.shape());
    const long hw = h * w;
    const long rows = b * t_out * h;
    std::vector<PartialSums> partials(static_cast<std::size_t>(rows));
    std::vector<double> reps(scale.representatives.begin(), scale.representatives.end());

#pragma omp parallel for schedule(static)
    for (long row = 0; row < rows; ++row) {
        const long bt = row / h, i = row % h;
        const long bi = bt / t_out, t = bt % t_out;
        const T* z = logits.data() + ((bi * t_out + t) * k) * hw + i * w;
        const float* tgt = target_rates.data() + bt * hw + i * w;
        const std::uint8_t* msk = valid.data() + bt * hw + i * w;
        T* dz = want_grad ? res.dlogits.data() + ((bi * t_out + t) * k) * hw + i * w : nullptr;
        PartialSums ps;
        std::vector<double> p(static_cast<std::size_t>(k));
        for (long j = 0; j < w; ++j) {
            if (!msk[j]) continue;
            T m = z[j];
            for (long c = 1; c < k; ++c) m = std::max(m, z[c * hw + j]);
            double sum_exp = 0.0;
            for (long c = 0; c < k; ++c) {
                p[static_cast<std::size_t>(c)] = std::exp(double(z[c * hw + j] - m));
                sum_exp += p[static_cast<std::size_t>(c)];
            }
            double rate = 0.0;
            for (long c = 0; c < k; ++c) {
                p[static_cast<std::size_t>(c)] /= sum_exp;
                rate += p[static_cast<std::size_t>(c)] * reps[static_cast<std::size_t>(c)];
            }
            const double d = rate - double(tgt[j]);
            ps.sum += d * d;
            ps.weight += 1.0;
            if (want_grad) {
                // d(rate)/dz_c = p_c (rep_c - rate)
                const double g = 2.0 * d;
                for (long c = 0; c < k; ++c)
                    dz[c * hw + j] = static_cast<T>(
                        g * p[static_cast<std::size_t>(c)] * (reps[static_cast<std::size_t>(c)] - rate));
            }
        }
        partials[static_cast<std::size_t>(row)] = ps;
    }
    for (const auto& ps : partials) {
        res.sum += ps.sum;
        res.weight += ps.weight;
    }
    if (res.weight <= 0.0) throw DataError("mse_decoded: no valid pixels");
    return res;
}

#define NOWCAST_LOSS_INSTANTIATE(T)                                                          \
    template LossResult<T> weighted_cross_entropy<T>(const TensorT<T>&,                      \
                                                     const TensorT<std::uint8_t>&, const Mask&, \
                                                     const std::vector<double>&, bool);      \
    template LossResult<T> mse_loss<T>(const TensorT<T>&, const TensorT<T>&, const Mask&);   \
    template LossResult<T> mse_decoded_loss<T>(const TensorT<T>&, const Tensor&, const Mask&, \
                                               const BucketScale&, bool);

NOWCAST_LOSS_INSTANTIATE(float)
NOWCAST_LOSS_INSTANTIATE(double)

}  // namespace nowcast
