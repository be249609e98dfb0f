#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "helm/rng.hpp"

namespace helm::nd {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// A named, possibly trainable weight matrix with its gradient slot.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;
};

/// Ordered collection of parameters. Models keep indices into the set, so a
/// model stays valid when copied together with its set.
class ParameterSet {
public:
    std::size_t add(std::string name, Matrix value, bool trainable = true);

    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }

    /// Throws std::out_of_range for unknown names.
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    void set_trainable(bool trainable);
    std::size_t scalar_count() const;

    /// Hex SHA-256 over names, shapes and raw values.
    std::string digest() const;

private:
    std::vector<Parameter> params_;
};

/// Dense weights from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix init_dense(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out);
/// Bias row for a dense layer with the same bound as its weights.
Matrix init_bias(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out);
/// Embedding table from N(0, 0.02^2).
Matrix init_embedding(Rng& rng, Eigen::Index rows, Eigen::Index cols);

std::string sha256_hex(const void* data, std::size_t size);

}  // namespace helm::nd
