#include "helm/ndiff/params.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace helm::nd {

std::size_t ParameterSet::add(std::string name, Matrix value, bool trainable)
{
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Parameter p;
    p.name = std::move(name);
    p.grad = Matrix::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

Parameter& ParameterSet::at(std::string_view name)
{
    for (auto& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("unknown parameter: " + std::string(name));
}

const Parameter& ParameterSet::at(std::string_view name) const
{
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("unknown parameter: " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const
{
    for (const auto& p : params_)
        if (p.name == name) return true;
    return false;
}

void ParameterSet::zero_grad()
{
    for (auto& p : params_) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
}

void ParameterSet::set_trainable(bool trainable)
{
    for (auto& p : params_) p.trainable = trainable;
}

std::size_t ParameterSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

std::string ParameterSet::digest() const
{
    std::string blob;
    for (const auto& p : params_) {
        blob += p.name;
        blob.push_back('\0');
        const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
        blob.append(reinterpret_cast<const char*>(shape), sizeof(shape));
        blob.append(reinterpret_cast<const char*>(p.value.data()),
                    static_cast<std::size_t>(p.value.size()) * sizeof(double));
    }
    return sha256_hex(blob.data(), blob.size());
}

Matrix init_dense(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r)
        for (Eigen::Index c = 0; c < fan_out; ++c) w(r, c) = rng.uniform(-bound, bound);
    return w;
}

Matrix init_bias(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix b(1, fan_out);
    for (Eigen::Index c = 0; c < fan_out; ++c) b(0, c) = rng.uniform(-bound, bound);
    return b;
}

Matrix init_embedding(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Matrix e(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) e(r, c) = rng.normal(0.0, 0.02);
    return e;
}

std::string sha256_hex(const void* data, std::size_t size)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data, size) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

}  // namespace helm::nd
