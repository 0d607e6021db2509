#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

// Layer primitives with explicit forward/backward passes. Templated over the
// scalar type: float for training and inference, double for the
// finite-difference gradient checks. Convolutions lower to GEMM (im2col for
// 3x3, direct for 1x1); batch loops parallelize over samples with OpenMP and
// BLAS is expected to run single-threaded underneath.
namespace nowcast::nn {

void gemm_f(bool trans_a, bool trans_b, long m, long n, long k, float alpha, const float* a,
            long lda, const float* b, long ldb, float beta, float* c, long ldc);
void gemm_d(bool trans_a, bool trans_b, long m, long n, long k, double alpha, const double* a,
            long lda, const double* b, long ldb, double beta, double* c, long ldc);

template <typename T>
void gemm(bool ta, bool tb, long m, long n, long k, T alpha, const T* a, long lda, const T* b,
          long ldb, T beta, T* c, long ldc) {
    if constexpr (std::is_same_v<T, float>)
        gemm_f(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    else
        gemm_d(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
struct Param {
    std::string name;
    TensorT<T>* value = nullptr;
    TensorT<T>* grad = nullptr;
};

// Named tensors that persist in checkpoints but receive no gradient
// (batch-norm running statistics).
template <typename T>
struct Buffer {
    std::string name;
    TensorT<T>* value = nullptr;
};

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1)
        : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride),
          pad_(pad >= 0 ? pad : ksize / 2) {
        weight_ = TensorT<T>({out_ch, in_ch, k_, k_});
        bias_ = TensorT<T>({out_ch});
        wgrad_ = TensorT<T>({out_ch, in_ch, k_, k_});
        bgrad_ = TensorT<T>({out_ch});
    }

    void init(Rng& rng) {
        // He-style fan-in scaling
        double scale = std::sqrt(2.0 / (double(in_ch_) * k_ * k_));
        for (std::size_t i = 0; i < weight_.size(); ++i)
            weight_[i] = static_cast<T>(rng.normal() * scale);
        bias_.zero();
    }

    TensorT<T> forward(const TensorT<T>& x);
    TensorT<T> backward(const TensorT<T>& dy);

    void collect(const std::string& prefix, std::vector<Param<T>>& params,
                 std::vector<Buffer<T>>& buffers) {
        (void)buffers;
        params.push_back({prefix + ".weight", &weight_, &wgrad_});
        params.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    TensorT<T>& weight() { return weight_; }
    TensorT<T>& bias() { return bias_; }
    int out_channels() const { return out_ch_; }

private:
    long out_size(long n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }
    void im2col(const T* x, long h, long w, long ho, long wo, T* col) const;
    void col2im(const T* col, long h, long w, long ho, long wo, T* dx) const;

    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    TensorT<T> weight_, bias_, wgrad_, bgrad_;
    TensorT<T> x_;  // cached forward input
};

template <typename T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels) : ch_(channels) {
        gamma_ = TensorT<T>::full({channels}, T(1));
        beta_ = TensorT<T>({channels});
        ggrad_ = TensorT<T>({channels});
        bgrad_ = TensorT<T>({channels});
        running_mean_ = TensorT<T>({channels});
        running_var_ = TensorT<T>::full({channels}, T(1));
    }

    TensorT<T> forward(const TensorT<T>& x, bool train);
    TensorT<T> backward(const TensorT<T>& dy);

    void collect(const std::string& prefix, std::vector<Param<T>>& params,
                 std::vector<Buffer<T>>& buffers) {
        params.push_back({prefix + ".gamma", &gamma_, &ggrad_});
        params.push_back({prefix + ".beta", &beta_, &bgrad_});
        buffers.push_back({prefix + ".running_mean", &running_mean_});
        buffers.push_back({prefix + ".running_var", &running_var_});
    }

private:
    int ch_ = 0;
    double momentum_ = 0.1;
    double eps_ = 1e-5;
    bool train_mode_ = true;
    TensorT<T> gamma_, beta_, ggrad_, bgrad_;
    TensorT<T> running_mean_, running_var_;
    TensorT<T> xhat_;                  // cached normalized input
    std::vector<double> inv_std_;      // per channel, from the stats used forward
};

template <typename T>
class ReLU {
public:
    TensorT<T> forward(const TensorT<T>& x) {
        y_ = x;
        for (std::size_t i = 0; i < y_.size(); ++i)
            if (y_[i] < T(0)) y_[i] = T(0);
        return y_;
    }
    TensorT<T> backward(const TensorT<T>& dy) {
        TensorT<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (y_[i] <= T(0)) dx[i] = T(0);
        return dx;
    }

private:
    TensorT<T> y_;
};

// x2 nearest-neighbor upsample used inside the decoder.
template <typename T>
TensorT<T> upsample2_nearest(const TensorT<T>& x);
template <typename T>
TensorT<T> upsample2_nearest_backward(const TensorT<T>& dy);

// Forecast-head resamplers, arbitrary integer factor, any leading dims
// collapsed into the channel axis [N, C, H, W].
template <typename T>
TensorT<T> upsample_nearest(const TensorT<T>& x, int factor);
template <typename T>
TensorT<T> upsample_nearest_backward(const TensorT<T>& dy, int factor);

// Half-pixel-center bilinear: source coord s = (i + 0.5)/f - 0.5 clamped to
// the valid range, separable linear interpolation.
template <typename T>
TensorT<T> upsample_bilinear(const TensorT<T>& x, int factor);
template <typename T>
TensorT<T> upsample_bilinear_backward(const TensorT<T>& dy, int factor, long src_h, long src_w);

// Sub-pixel rearrangement: [B, C*r^2, H, W] -> [B, C, H*r, W*r].
template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int r);
template <typename T>
TensorT<T> pixel_shuffle_backward(const TensorT<T>& dy, int r);

template <typename T>
TensorT<T> crop_center(const TensorT<T>& x, int crop);
template <typename T>
TensorT<T> crop_center_backward(const TensorT<T>& dy, long full_h, long full_w);

template <typename T>
void add_inplace(TensorT<T>& x, const TensorT<T>& y) {
    if (!x.same_shape(y)) throw DataError("add: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

}  // namespace nowcast::nn
