#include "helm/ndiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace helm::nd {

namespace {

constexpr char magic[4] = {'H', 'E', 'L', 'M'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <class T>
    T get_le()
    {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }

    std::string get_string(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

NamedArray to_named_array(std::string name, const Matrix& m)
{
    NamedArray a;
    a.name = std::move(name);
    a.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    a.values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.values.push_back(m(r, c));
    return a;
}

NamedArray scalar_array(std::string name, double value)
{
    return NamedArray{std::move(name), {}, {value}};
}

Matrix to_matrix(const NamedArray& a)
{
    if (a.shape.size() == 0) return Matrix::Constant(1, 1, a.values.at(0));
    if (a.shape.size() > 2) throw std::invalid_argument("to_matrix: rank > 2 for " + a.name);
    const Eigen::Index rows = a.shape.size() == 2 ? a.shape[0] : 1;
    const Eigen::Index cols = a.shape.back();
    if (static_cast<std::size_t>(rows * cols) != a.values.size())
        throw std::invalid_argument("to_matrix: value count does not match shape for " + a.name);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a.values[static_cast<std::size_t>(r * cols + c)];
    return m;
}

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedArray>& arrays)
{
    std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
    put_le<std::uint16_t>(out, checkpoint_version);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (const NamedArray& a : arrays) {
        std::size_t count = 1;
        for (auto e : a.shape) count *= e;
        if (count != a.values.size()) throw std::invalid_argument("checkpoint: shape/value mismatch for " + a.name);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
        out.insert(out.end(), a.name.begin(), a.name.end());
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
        for (auto e : a.shape) put_le<std::uint32_t>(out, e);
        for (double v : a.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<NamedArray> decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    Reader in(bytes);
    in.get_string(4);
    const auto version = in.get_le<std::uint16_t>();
    if (version != checkpoint_version)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto n = in.get_le<std::uint32_t>();
    std::vector<NamedArray> arrays;
    arrays.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedArray a;
        a.name = in.get_string(in.get_le<std::uint32_t>());
        const auto rank = in.get_le<std::uint32_t>();
        std::size_t count = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            a.shape.push_back(in.get_le<std::uint32_t>());
            count *= a.shape.back();
        }
        a.values.reserve(count);
        for (std::size_t k = 0; k < count; ++k) a.values.push_back(std::bit_cast<double>(in.get_le<std::uint64_t>()));
        arrays.push_back(std::move(a));
    }
    if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
    return arrays;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays)
{
    const auto bytes = encode_checkpoint(arrays);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("checkpoint: cannot open " + tmp);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

std::vector<NamedArray> to_arrays(const ParameterSet& params, const std::string& prefix)
{
    std::vector<NamedArray> out;
    for (const auto& p : params) out.push_back(to_named_array(prefix + p.name, p.value));
    return out;
}

std::size_t load_arrays(ParameterSet& params, const std::vector<NamedArray>& arrays, const std::string& prefix)
{
    std::size_t loaded = 0;
    for (auto& p : params) {
        const NamedArray* a = find_array(arrays, prefix + p.name);
        if (!a) continue;
        Matrix m = to_matrix(*a);
        if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
            throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
        p.value = std::move(m);
        ++loaded;
    }
    return loaded;
}

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name)
{
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

}  // namespace helm::nd
