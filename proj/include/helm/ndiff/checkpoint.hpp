#pragma once

// Binary checkpoint format shared by every component.
//
//   bytes 0..3   magic "HELM"
//   u16          format version (currently 1)
//   u32          number of entries
//   per entry:
//     u32        name length in bytes
//     bytes      UTF-8 name
//     u32        rank
//     u32[rank]  extents
//     f64[prod]  values, row-major
//
// All integers and floats are little-endian regardless of host order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "helm/ndiff/params.hpp"

namespace helm::nd {

inline constexpr std::uint16_t checkpoint_version = 1;

struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<double> values;

    bool operator==(const NamedArray&) const = default;
};

NamedArray to_named_array(std::string name, const Matrix& m);
NamedArray scalar_array(std::string name, double value);
/// Rank 0, 1 (as a row) or 2.
Matrix to_matrix(const NamedArray& a);

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

std::vector<NamedArray> to_arrays(const ParameterSet& params, const std::string& prefix = "");
/// Copies values for every parameter whose prefixed name is present; shapes
/// must match. Returns the number of parameters loaded.
std::size_t load_arrays(ParameterSet& params, const std::vector<NamedArray>& arrays, const std::string& prefix = "");

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace helm::nd
