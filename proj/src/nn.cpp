#include "nowcast/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

extern "C" void openblas_set_num_threads(int);

namespace nowcast::nn {

namespace {

struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;  // batch loops own the parallelism

}  // namespace

void gemm_f(bool ta, bool tb, long m, long n, long k, float alpha, const float* a, long lda,
            const float* b, long ldb, float beta, float* c, long ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

void gemm_d(bool ta, bool tb, long m, long n, long k, double alpha, const double* a, long lda,
            const double* b, long ldb, double beta, double* c, long ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <typename T>
void Conv2d<T>::im2col(const T* x, long h, long w, long ho, long wo, T* col) const {
    const long k = k_, s = stride_, p = pad_;
    for (long c = 0; c < in_ch_; ++c)
        for (long ki = 0; ki < k; ++ki)
            for (long kj = 0; kj < k; ++kj) {
                T* dst = col + ((c * k + ki) * k + kj) * ho * wo;
                for (long oi = 0; oi < ho; ++oi) {
                    const long ii = oi * s - p + ki;
                    if (ii < 0 || ii >= h) {
                        std::fill(dst + oi * wo, dst + (oi + 1) * wo, T(0));
                        continue;
                    }
                    const T* src_row = x + (c * h + ii) * w;
                    T* dst_row = dst + oi * wo;
                    if (s == 1) {
                        const long jj0 = -p + kj;
                        long lo = std::max(0l, -jj0);
                        long hi = std::min(wo, w - jj0);
                        if (lo > 0) std::fill(dst_row, dst_row + lo, T(0));
                        if (hi < wo) std::fill(dst_row + std::max(lo, hi), dst_row + wo, T(0));
                        if (hi > lo) std::memcpy(dst_row + lo, src_row + jj0 + lo,
                                                 static_cast<std::size_t>(hi - lo) * sizeof(T));
                    } else {
                        for (long oj = 0; oj < wo; ++oj) {
                            const long jj = oj * s - p + kj;
                            dst_row[oj] = (jj >= 0 && jj < w) ? src_row[jj] : T(0);
                        }
                    }
                }
            }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, long h, long w, long ho, long wo, T* dx) const {
    const long k = k_, s = stride_, p = pad_;
    for (long c = 0; c < in_ch_; ++c)
        for (long ki = 0; ki < k; ++ki)
            for (long kj = 0; kj < k; ++kj) {
                const T* src = col + ((c * k + ki) * k + kj) * ho * wo;
                for (long oi = 0; oi < ho; ++oi) {
                    const long ii = oi * s - p + ki;
                    if (ii < 0 || ii >= h) continue;
                    T* dst_row = dx + (c * h + ii) * w;
                    const T* src_row = src + oi * wo;
                    for (long oj = 0; oj < wo; ++oj) {
                        const long jj = oj * s - p + kj;
                        if (jj >= 0 && jj < w) dst_row[jj] += src_row[oj];
                    }
                }
            }
}

template <typename T>
TensorT<T> Conv2d<T>::forward(const TensorT<T>& x) {
    if (x.rank() != 4 || x.dim(1) != in_ch_)
        throw DataError("conv: expected input [B," + std::to_string(in_ch_) + ",H,W], got " +
                        x.shape_str());
    x_ = x;
    const long b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const long ho = out_size(h), wo = out_size(w);
    TensorT<T> y({b, out_ch_, ho, wo});
    const long ck2 = long(in_ch_) * k_ * k_;
    const long px = ho * wo;

#pragma omp parallel
    {
        TensorT<T> col;
        if (k_ != 1 || stride_ != 1 || pad_ != 0) col = TensorT<T>({ck2, px});
#pragma omp for schedule(static)
        for (long n = 0; n < b; ++n) {
            const T* xn = x.data() + n * in_ch_ * h * w;
            T* yn = y.data() + n * out_ch_ * px;
            const T* cols;
            if (k_ == 1 && stride_ == 1 && pad_ == 0) {
                cols = xn;  // 1x1: columns are the input itself
            } else {
                im2col(xn, h, w, ho, wo, col.data());
                cols = col.data();
            }
            gemm<T>(false, false, out_ch_, px, ck2, T(1), weight_.data(), ck2, cols, px, T(0), yn,
                    px);
            for (long oc = 0; oc < out_ch_; ++oc) {
                const T bv = bias_[static_cast<std::size_t>(oc)];
                T* row = yn + oc * px;
                for (long i = 0; i < px; ++i) row[i] += bv;
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> Conv2d<T>::backward(const TensorT<T>& dy) {
    const long b = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const long ho = out_size(h), wo = out_size(w);
    const long ck2 = long(in_ch_) * k_ * k_;
    const long px = ho * wo;
    TensorT<T> dx(x_.shape());

    const int max_threads = std::min<long>(b, 8);
    std::vector<TensorT<T>> wgrad_part(static_cast<std::size_t>(max_threads));
    std::vector<TensorT<T>> bgrad_part(static_cast<std::size_t>(max_threads));

#pragma omp parallel num_threads(max_threads)
    {
        TensorT<T> col({ck2, px});
        TensorT<T> dcol({ck2, px});
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        wgrad_part[static_cast<std::size_t>(tid)] = TensorT<T>(weight_.shape());
        bgrad_part[static_cast<std::size_t>(tid)] = TensorT<T>(bias_.shape());
        TensorT<T>& wg = wgrad_part[static_cast<std::size_t>(tid)];
        TensorT<T>& bg = bgrad_part[static_cast<std::size_t>(tid)];

#pragma omp for schedule(static)
        for (long n = 0; n < b; ++n) {
            const T* xn = x_.data() + n * in_ch_ * h * w;
            const T* dyn = dy.data() + n * out_ch_ * px;
            T* dxn = dx.data() + n * in_ch_ * h * w;

            const bool identity_cols = (k_ == 1 && stride_ == 1 && pad_ == 0);
            const T* cols;
            if (identity_cols) {
                cols = xn;
            } else {
                im2col(xn, h, w, ho, wo, col.data());
                cols = col.data();
            }
            // dW += dy . col^T
            gemm<T>(false, true, out_ch_, ck2, px, T(1), dyn, px, cols, px, T(1), wg.data(), ck2);
            for (long oc = 0; oc < out_ch_; ++oc) {
                double s = 0.0;
                const T* row = dyn + oc * px;
                for (long i = 0; i < px; ++i) s += double(row[i]);
                bg[static_cast<std::size_t>(oc)] += static_cast<T>(s);
            }
            // dcol = W^T . dy, then scatter back
            if (identity_cols) {
                gemm<T>(true, false, ck2, px, out_ch_, T(1), weight_.data(), ck2, dyn, px, T(0),
                        dxn, px);
            } else {
                gemm<T>(true, false, ck2, px, out_ch_, T(1), weight_.data(), ck2, dyn, px, T(0),
                        dcol.data(), px);
                col2im(dcol.data(), h, w, ho, wo, dxn);
            }
        }
    }
    for (int t = 0; t < max_threads; ++t) {
        if (wgrad_part[static_cast<std::size_t>(t)].empty()) continue;
        for (std::size_t i = 0; i < wgrad_.size(); ++i)
            wgrad_[i] += wgrad_part[static_cast<std::size_t>(t)][i];
        for (std::size_t i = 0; i < bgrad_.size(); ++i)
            bgrad_[i] += bgrad_part[static_cast<std::size_t>(t)][i];
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> BatchNorm2d<T>::forward(const TensorT<T>& x, bool train) {
    if (x.rank() != 4 || x.dim(1) != ch_)
        throw DataError("batchnorm: expected [B," + std::to_string(ch_) + ",H,W], got " +
                        x.shape_str());
    train_mode_ = train;
    const long b = x.dim(0), hw = x.dim(2) * x.dim(3);
    const double n = double(b) * double(hw);
    inv_std_.assign(static_cast<std::size_t>(ch_), 0.0);
    std::vector<double> mean(static_cast<std::size_t>(ch_), 0.0);

    if (train) {
        std::vector<double> sum(static_cast<std::size_t>(ch_), 0.0);
        std::vector<double> sum2(static_cast<std::size_t>(ch_), 0.0);
        for (long s = 0; s < b; ++s)
            for (long c = 0; c < ch_; ++c) {
                const T* p = x.data() + (s * ch_ + c) * hw;
                double a = 0.0, a2 = 0.0;
                for (long i = 0; i < hw; ++i) {
                    a += double(p[i]);
                    a2 += double(p[i]) * double(p[i]);
                }
                sum[static_cast<std::size_t>(c)] += a;
                sum2[static_cast<std::size_t>(c)] += a2;
            }
        for (long c = 0; c < ch_; ++c) {
            const std::size_t ci = static_cast<std::size_t>(c);
            mean[ci] = sum[ci] / n;
            double var = std::max(0.0, sum2[ci] / n - mean[ci] * mean[ci]);
            inv_std_[ci] = 1.0 / std::sqrt(var + eps_);
            running_mean_[ci] =
                static_cast<T>((1.0 - momentum_) * double(running_mean_[ci]) + momentum_ * mean[ci]);
            running_var_[ci] =
                static_cast<T>((1.0 - momentum_) * double(running_var_[ci]) + momentum_ * var);
        }
    } else {
        for (long c = 0; c < ch_; ++c) {
            const std::size_t ci = static_cast<std::size_t>(c);
            mean[ci] = double(running_mean_[ci]);
            inv_std_[ci] = 1.0 / std::sqrt(double(running_var_[ci]) + eps_);
        }
    }

    xhat_ = TensorT<T>(x.shape());
    TensorT<T> y(x.shape());
#pragma omp parallel for schedule(static)
    for (long s = 0; s < b; ++s)
        for (long c = 0; c < ch_; ++c) {
            const std::size_t ci = static_cast<std::size_t>(c);
            const T* p = x.data() + (s * ch_ + c) * hw;
            T* xh = xhat_.data() + (s * ch_ + c) * hw;
            T* py = y.data() + (s * ch_ + c) * hw;
            const T m = static_cast<T>(mean[ci]);
            const T is = static_cast<T>(inv_std_[ci]);
            const T g = gamma_[ci], bt = beta_[ci];
            for (long i = 0; i < hw; ++i) {
                xh[i] = (p[i] - m) * is;
                py[i] = g * xh[i] + bt;
            }
        }
    return y;
}

template <typename T>
TensorT<T> BatchNorm2d<T>::backward(const TensorT<T>& dy) {
    const long b = dy.dim(0), hw = dy.dim(2) * dy.dim(3);
    const double n = double(b) * double(hw);
    TensorT<T> dx(dy.shape());

    std::vector<double> sum_dy(static_cast<std::size_t>(ch_), 0.0);
    std::vector<double> sum_dy_xhat(static_cast<std::size_t>(ch_), 0.0);
    for (long s = 0; s < b; ++s)
        for (long c = 0; c < ch_; ++c) {
            const T* pdy = dy.data() + (s * ch_ + c) * hw;
            const T* xh = xhat_.data() + (s * ch_ + c) * hw;
            double a = 0.0, a2 = 0.0;
            for (long i = 0; i < hw; ++i) {
                a += double(pdy[i]);
                a2 += double(pdy[i]) * double(xh[i]);
            }
            sum_dy[static_cast<std::size_t>(c)] += a;
            sum_dy_xhat[static_cast<std::size_t>(c)] += a2;
        }
    for (long c = 0; c < ch_; ++c) {
        const std::size_t ci = static_cast<std::size_t>(c);
        ggrad_[ci] += static_cast<T>(sum_dy_xhat[ci]);
        bgrad_[ci] += static_cast<T>(sum_dy[ci]);
    }

#pragma omp parallel for schedule(static)
    for (long s = 0; s < b; ++s)
        for (long c = 0; c < ch_; ++c) {
            const std::size_t ci = static_cast<std::size_t>(c);
            const T* pdy = dy.data() + (s * ch_ + c) * hw;
            const T* xh = xhat_.data() + (s * ch_ + c) * hw;
            T* pdx = dx.data() + (s * ch_ + c) * hw;
            const double g_is = double(gamma_[ci]) * inv_std_[ci];
            if (train_mode_) {
                const double mean_dy = sum_dy[ci] / n;
                const double mean_dy_xhat = sum_dy_xhat[ci] / n;
                for (long i = 0; i < hw; ++i)
                    pdx[i] = static_cast<T>(g_is * (double(pdy[i]) - mean_dy -
                                                    double(xh[i]) * mean_dy_xhat));
            } else {
                for (long i = 0; i < hw; ++i) pdx[i] = static_cast<T>(g_is * double(pdy[i]));
            }
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Resamplers
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void as_nchw(const TensorT<T>& x, long& nc, long& h, long& w) {
    if (x.rank() < 2) throw DataError("resample: rank must be >= 2");
    h = x.dim(x.rank() - 2);
    w = x.dim(x.rank() - 1);
    nc = static_cast<long>(x.size()) / (h * w);
}

}  // namespace

template <typename T>
TensorT<T> upsample2_nearest(const TensorT<T>& x) {
    return upsample_nearest(x, 2);
}

template <typename T>
TensorT<T> upsample2_nearest_backward(const TensorT<T>& dy) {
    return upsample_nearest_backward(dy, 2);
}

template <typename T>
TensorT<T> upsample_nearest(const TensorT<T>& x, int factor) {
    long nc, h, w;
    as_nchw(x, nc, h, w);
    std::vector<long> shape = x.shape();
    shape[shape.size() - 2] = h * factor;
    shape[shape.size() - 1] = w * factor;
    TensorT<T> y(shape);
    const long ho = h * factor, wo = w * factor;
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nc; ++c) {
        const T* src = x.data() + c * h * w;
        T* dst = y.data() + c * ho * wo;
        for (long i = 0; i < ho; ++i) {
            const T* srow = src + (i / factor) * w;
            T* drow = dst + i * wo;
            for (long j = 0; j < wo; ++j) drow[j] = srow[j / factor];
        }
    }
    return y;
}

template <typename T>
TensorT<T> upsample_nearest_backward(const TensorT<T>& dy, int factor) {
    long nc, ho, wo;
    as_nchw(dy, nc, ho, wo);
    const long h = ho / factor, w = wo / factor;
    std::vector<long> shape = dy.shape();
    shape[shape.size() - 2] = h;
    shape[shape.size() - 1] = w;
    TensorT<T> dx(shape);
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nc; ++c) {
        const T* src = dy.data() + c * ho * wo;
        T* dst = dx.data() + c * h * w;
        for (long i = 0; i < ho; ++i) {
            const T* srow = src + i * wo;
            T* drow = dst + (i / factor) * w;
            for (long j = 0; j < wo; ++j) drow[j / factor] += srow[j];
        }
    }
    return dx;
}

namespace {

struct LerpTap {
    long i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<LerpTap> bilinear_taps(long out, long src, int factor) {
    std::vector<LerpTap> taps(static_cast<std::size_t>(out));
    for (long i = 0; i < out; ++i) {
        double s = (i + 0.5) / factor - 0.5;
        s = std::min(std::max(s, 0.0), double(src - 1));
        long i0 = static_cast<long>(std::floor(s));
        long i1 = std::min(i0 + 1, src - 1);
        taps[static_cast<std::size_t>(i)] = {i0, i1, s - double(i0)};
    }
    return taps;
}

}  // namespace

template <typename T>
TensorT<T> upsample_bilinear(const TensorT<T>& x, int factor) {
    long nc, h, w;
    as_nchw(x, nc, h, w);
    const long ho = h * factor, wo = w * factor;
    std::vector<long> shape = x.shape();
    shape[shape.size() - 2] = ho;
    shape[shape.size() - 1] = wo;
    TensorT<T> y(shape);
    auto rows = bilinear_taps(ho, h, factor);
    auto cols = bilinear_taps(wo, w, factor);
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nc; ++c) {
        const T* src = x.data() + c * h * w;
        T* dst = y.data() + c * ho * wo;
        for (long i = 0; i < ho; ++i) {
            const auto& ri = rows[static_cast<std::size_t>(i)];
            const T* r0 = src + ri.i0 * w;
            const T* r1 = src + ri.i1 * w;
            T* drow = dst + i * wo;
            for (long j = 0; j < wo; ++j) {
                const auto& cj = cols[static_cast<std::size_t>(j)];
                double top = double(r0[cj.i0]) * (1.0 - cj.w1) + double(r0[cj.i1]) * cj.w1;
                double bot = double(r1[cj.i0]) * (1.0 - cj.w1) + double(r1[cj.i1]) * cj.w1;
                drow[j] = static_cast<T>(top * (1.0 - ri.w1) + bot * ri.w1);
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> upsample_bilinear_backward(const TensorT<T>& dy, int factor, long src_h, long src_w) {
    long nc, ho, wo;
    as_nchw(dy, nc, ho, wo);
    std::vector<long> shape = dy.shape();
    shape[shape.size() - 2] = src_h;
    shape[shape.size() - 1] = src_w;
    TensorT<T> dx(shape);
    auto rows = bilinear_taps(ho, src_h, factor);
    auto cols = bilinear_taps(wo, src_w, factor);
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nc; ++c) {
        const T* src = dy.data() + c * ho * wo;
        T* dst = dx.data() + c * src_h * src_w;
        for (long i = 0; i < ho; ++i) {
            const auto& ri = rows[static_cast<std::size_t>(i)];
            const T* srow = src + i * wo;
            for (long j = 0; j < wo; ++j) {
                const auto& cj = cols[static_cast<std::size_t>(j)];
                const double g = double(srow[j]);
                dst[ri.i0 * src_w + cj.i0] += static_cast<T>(g * (1.0 - ri.w1) * (1.0 - cj.w1));
                dst[ri.i0 * src_w + cj.i1] += static_cast<T>(g * (1.0 - ri.w1) * cj.w1);
                dst[ri.i1 * src_w + cj.i0] += static_cast<T>(g * ri.w1 * (1.0 - cj.w1));
                dst[ri.i1 * src_w + cj.i1] += static_cast<T>(g * ri.w1 * cj.w1);
            }
        }
    }
    return dx;
}

template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int r) {
    if (x.rank() != 4) throw DataError("pixel_shuffle: expected [B,C,H,W]");
    const long b = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c_in % (r * r) != 0) throw DataError("pixel_shuffle: channels not divisible by r^2");
    const long c = c_in / (r * r);
    TensorT<T> y({b, c, h * r, w * r});
    for (long n = 0; n < b; ++n)
        for (long oc = 0; oc < c; ++oc)
            for (long di = 0; di < r; ++di)
                for (long dj = 0; dj < r; ++dj) {
                    const T* src = x.data() + ((n * c_in + oc * r * r + di * r + dj) * h) * w;
                    for (long i = 0; i < h; ++i) {
                        T* dst = y.data() + ((n * c + oc) * h * r + i * r + di) * (w * r) + dj;
                        const T* s = src + i * w;
                        for (long j = 0; j < w; ++j) dst[j * r] = s[j];
                    }
                }
    return y;
}

template <typename T>
TensorT<T> pixel_shuffle_backward(const TensorT<T>& dy, int r) {
    if (dy.rank() != 4) throw DataError("pixel_shuffle_backward: expected [B,C,H,W]");
    const long b = dy.dim(0), c = dy.dim(1), ho = dy.dim(2), wo = dy.dim(3);
    const long h = ho / r, w = wo / r;
    TensorT<T> dx({b, c * r * r, h, w});
    for (long n = 0; n < b; ++n)
        for (long oc = 0; oc < c; ++oc)
            for (long di = 0; di < r; ++di)
                for (long dj = 0; dj < r; ++dj) {
                    T* dst = dx.data() + ((n * c * r * r + oc * r * r + di * r + dj) * h) * w;
                    for (long i = 0; i < h; ++i) {
                        const T* src = dy.data() + ((n * c + oc) * ho + i * r + di) * wo + dj;
                        T* d = dst + i * w;
                        for (long j = 0; j < w; ++j) d[j] = src[j * r];
                    }
                }
    return dx;
}

template <typename T>
TensorT<T> crop_center(const TensorT<T>& x, int crop) {
    long nc, h, w;
    as_nchw(x, nc, h, w);
    if (h < crop || w < crop) throw DataError("crop_center: input smaller than crop");
    const long oi = (h - crop) / 2, oj = (w - crop) / 2;
    std::vector<long> shape = x.shape();
    shape[shape.size() - 2] = crop;
    shape[shape.size() - 1] = crop;
    TensorT<T> y(shape);
    for (long c = 0; c < nc; ++c) {
        const T* src = x.data() + c * h * w;
        T* dst = y.data() + c * crop * crop;
        for (long i = 0; i < crop; ++i)
            std::memcpy(dst + i * crop, src + (oi + i) * w + oj,
                        static_cast<std::size_t>(crop) * sizeof(T));
    }
    return y;
}

template <typename T>
TensorT<T> crop_center_backward(const TensorT<T>& dy, long full_h, long full_w) {
    long nc, ch, cw;
    as_nchw(dy, nc, ch, cw);
    const long oi = (full_h - ch) / 2, oj = (full_w - cw) / 2;
    std::vector<long> shape = dy.shape();
    shape[shape.size() - 2] = full_h;
    shape[shape.size() - 1] = full_w;
    TensorT<T> dx(shape);
    for (long c = 0; c < nc; ++c) {
        const T* src = dy.data() + c * ch * cw;
        T* dst = dx.data() + c * full_h * full_w;
        for (long i = 0; i < ch; ++i)
            std::memcpy(dst + (oi + i) * full_w + oj, src + i * cw,
                        static_cast<std::size_t>(cw) * sizeof(T));
    }
    return dx;
}

// Explicit instantiations for the two scalar types in use.
#define NOWCAST_NN_INSTANTIATE(T)                                                       \
    template class Conv2d<T>;                                                           \
    template class BatchNorm2d<T>;                                                      \
    template TensorT<T> upsample2_nearest<T>(const TensorT<T>&);                        \
    template TensorT<T> upsample2_nearest_backward<T>(const TensorT<T>&);               \
    template TensorT<T> upsample_nearest<T>(const TensorT<T>&, int);                    \
    template TensorT<T> upsample_nearest_backward<T>(const TensorT<T>&, int);           \
    template TensorT<T> upsample_bilinear<T>(const TensorT<T>&, int);                   \
    template TensorT<T> upsample_bilinear_backward<T>(const TensorT<T>&, int, long, long); \
    template TensorT<T> pixel_shuffle<T>(const TensorT<T>&, int);                       \
    template TensorT<T> pixel_shuffle_backward<T>(const TensorT<T>&, int);              \
    template TensorT<T> crop_center<T>(const TensorT<T>&, int);                         \
    template TensorT<T> crop_center_backward<T>(const TensorT<T>&, long, long);

NOWCAST_NN_INSTANTIATE(float)
NOWCAST_NN_INSTANTIATE(double)

}  // namespace nowcast::nn
