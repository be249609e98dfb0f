#include <cmath>

#include "helm/hopfield/hopfield.hpp"

namespace helm::hopfield {

CapacityBound capacity_bound(double beta, double radius_scale, int dim, double failure_prob)
{
    if (!(failure_prob > 0.0 && failure_prob <= 1.0)) throw std::invalid_argument("capacity_bound: need 0 < p <= 1");
    if (dim < 2) throw std::invalid_argument("capacity_bound: need m >= 2");
    if (!(beta > 0.0)) throw std::invalid_argument("capacity_bound: need beta > 0");
    if (!(radius_scale > 0.0)) throw std::invalid_argument("capacity_bound: need K > 0");

    CapacityBound cb;
    cb.beta = beta;
    cb.radius_scale = radius_scale;
    cb.dim = dim;
    cb.failure_prob = failure_prob;
    const double m1 = dim - 1.0;
    const double k2 = radius_scale * radius_scale;
    cb.a = 2.0 / m1 * (1.0 + std::log(2.0 * beta * k2 * failure_prob * m1));
    cb.b = 2.0 * k2 * beta / 5.0;
    cb.exponent = cb.a + std::log(cb.b);
    cb.c = cb.b / lambert_w0(std::exp(cb.exponent));
    cb.min_patterns = std::sqrt(failure_prob) * std::pow(cb.c, m1 / 4.0);
    cb.c_threshold = std::pow(2.0 / std::sqrt(failure_prob), 4.0 / m1);
    cb.feasible = cb.c >= cb.c_threshold;
    return cb;
}

}  // namespace helm::hopfield
