#pragma once

#include <cmath>
#include <vector>

#include "nowcast/nn.hpp"

namespace nowcast {

// Adaptive moment estimation with the usual decay constants. step() applies
// the accumulated gradients scaled by `grad_scale` (the loss normalizer), so
// gradient accumulation across micro-batches matches one large batch.
template <typename T>
class Adam {
public:
    Adam(std::vector<nn::Param<T>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        slots_.reserve(params_.size());
        for (const auto& p : params_) slots_.push_back({TensorT<T>(p.value->shape()),
                                                        TensorT<T>(p.value->shape())});
    }

    void step(double grad_scale) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, double(t_));
        const double c2 = 1.0 - std::pow(beta2_, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            TensorT<T>& value = *params_[i].value;
            const TensorT<T>& grad = *params_[i].grad;
            TensorT<T>& m = slots_[i].m;
            TensorT<T>& v = slots_[i].v;
            for (std::size_t j = 0; j < value.size(); ++j) {
                const double g = double(grad[j]) * grad_scale;
                const double mj = beta1_ * double(m[j]) + (1.0 - beta1_) * g;
                const double vj = beta2_ * double(v[j]) + (1.0 - beta2_) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                value[j] -= static_cast<T>(lr_ * (mj / c1) / (std::sqrt(vj / c2) + eps_));
            }
        }
    }

    double learning_rate() const { return lr_; }
    long step_count() const { return t_; }

private:
    struct Slot {
        TensorT<T> m, v;
    };
    std::vector<nn::Param<T>> params_;
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace nowcast
