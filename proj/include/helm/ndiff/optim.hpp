#pragma once

#include <vector>

#include "helm/ndiff/params.hpp"

namespace helm::nd {

/// Decoupled-weight-decay Adam. Defaults follow the common reference
/// implementation (betas 0.9/0.999, eps 1e-8, weight decay 1e-2).
struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

struct OptimizerState {
    AdamWConfig config;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    long step = 0;
};

OptimizerState make_optimizer_state(const ParameterSet& params, const AdamWConfig& config);

/// One AdamW step over every trainable parameter using its grad slot:
///   p <- p - lr * wd * p
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws std::domain_error naming the parameter if a gradient is not finite.
void adamw_step(ParameterSet& params, OptimizerState& state);

/// Global L2 norm over the grads of trainable parameters.
double grad_norm(const ParameterSet& params);

/// Rescales all trainable grads so the global norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace helm::nd
