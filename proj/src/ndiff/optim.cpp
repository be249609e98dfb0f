#include "helm/ndiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace helm::nd {

OptimizerState make_optimizer_state(const ParameterSet& params, const AdamWConfig& config)
{
    OptimizerState s;
    s.config = config;
    for (const auto& p : params) {
        s.first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        s.second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
    return s;
}

void adamw_step(ParameterSet& params, OptimizerState& state)
{
    if (state.first_moment.size() != params.size())
        throw std::invalid_argument("adamw_step: optimizer state does not match parameter set");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter& p = params[i];
        if (!p.trainable) continue;
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
            throw std::invalid_argument("adamw_step: gradient shape mismatch for " + p.name);
        if (!p.grad.allFinite()) throw std::domain_error("adamw_step: non-finite gradient in " + p.name);
    }

    const AdamWConfig& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (!p.trainable) continue;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        p.value *= 1.0 - c.lr * c.weight_decay;
        m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
        v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
    }
}

double grad_norm(const ParameterSet& params)
{
    double sq = 0.0;
    for (const auto& p : params)
        if (p.trainable) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
}

double clip_grad_norm(ParameterSet& params, double max_norm)
{
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_norm: max_norm must be positive");
    const double norm = grad_norm(params);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& p : params)
            if (p.trainable) p.grad *= factor;
    }
    return norm;
}

}  // namespace helm::nd
