#pragma once

#include "gnet/autodiff.hpp"
#include "gnet/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

namespace gnet {

/// Trainable parameters addressed by stable dotted path names
/// ("encoder.conv1.theta1"). Iteration is in sorted path order.
class ParamStore {
public:
    using map_type = std::map<std::string, ad::Value>;

    ad::Value& add(const std::string& path, std::size_t rows, std::size_t cols, std::vector<double> data) {
        if (params_.contains(path)) throw std::invalid_argument("param store: duplicate path '" + path + "'");
        return params_.emplace(path, ad::Value::parameter(rows, cols, std::move(data))).first->second;
    }

    const ad::Value& at(const std::string& path) const {
        auto it = params_.find(path);
        if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + path + "'");
        return it->second;
    }
    ad::Value& at(const std::string& path) {
        auto it = params_.find(path);
        if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + path + "'");
        return it->second;
    }

    bool contains(const std::string& path) const { return params_.contains(path); }
    std::size_t size() const { return params_.size(); }

    std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto& [_, v] : params_) n += v.size();
        return n;
    }

    void zero_grad() {
        for (auto& [_, v] : params_) v.zero_grad();
    }

    /// Independent copy: new parameter nodes with the same values.
    ParamStore clone() const {
        ParamStore out;
        for (const auto& [path, v] : params_) {
            out.add(path, v.rows(), v.cols(), std::vector<double>(v.data().begin(), v.data().end()));
        }
        return out;
    }

    /// Overwrites values in place from a store with identical paths and shapes.
    void assign(const ParamStore& other) {
        if (other.size() != size()) throw shape_error("param store: assign between stores of different size");
        for (auto& [path, v] : params_) {
            const auto& src = other.at(path);
            if (src.rows() != v.rows() || src.cols() != v.cols()) {
                throw shape_error("param store: shape mismatch for '" + path + "': " + v.shape_str() + " vs " +
                                  src.shape_str());
            }
            std::copy(src.data().begin(), src.data().end(), v.data().begin());
        }
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    friend bool operator==(const ParamStore& a, const ParamStore& b) {
        if (a.size() != b.size()) return false;
        for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
            if (ia->first != ib->first || ia->second.rows() != ib->second.rows() ||
                ia->second.cols() != ib->second.cols() ||
                !std::equal(ia->second.data().begin(), ia->second.data().end(), ib->second.data().begin())) {
                return false;
            }
        }
        return true;
    }

private:
    map_type params_;
};

// Binary layout (little-endian):
//   char[8]  magic "GNETPRM\0"
//   u32      version (1)
//   u64      entry count
//   per entry, in sorted path order:
//     u32 path length, path bytes, u64 rows, u64 cols, rows*cols IEEE-754 f64
inline constexpr char kParamMagic[8] = {'G', 'N', 'E', 'T', 'P', 'R', 'M', '\0'};
inline constexpr std::uint32_t kParamVersion = 1;

namespace io_detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw format_error(std::string("truncated checkpoint while reading ") + what);
    }
    return v;
}

} // namespace io_detail

inline void write_params(std::ostream& out, const ParamStore& store) {
    using namespace io_detail;
    out.write(kParamMagic, sizeof(kParamMagic));
    put<std::uint32_t>(out, kParamVersion);
    put<std::uint64_t>(out, store.size());
    for (const auto& [path, v] : store) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(path.size()));
        out.write(path.data(), static_cast<std::streamsize>(path.size()));
        put<std::uint64_t>(out, v.rows());
        put<std::uint64_t>(out, v.cols());
        out.write(reinterpret_cast<const char*>(v.data().data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
}

inline ParamStore read_params(std::istream& in) {
    using namespace io_detail;
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
        throw format_error("parameter payload: bad magic");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kParamVersion) throw format_error("parameter payload: unsupported version " + std::to_string(version));
    const auto count = get<std::uint64_t>(in, "entry count");
    ParamStore store;
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto len = get<std::uint32_t>(in, "path length");
        std::string path(len, '\0');
        if (!in.read(path.data(), len)) throw format_error("truncated checkpoint while reading path");
        const auto rows = get<std::uint64_t>(in, "rows");
        const auto cols = get<std::uint64_t>(in, "cols");
        std::vector<double> data(rows * cols);
        if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
            throw format_error("truncated checkpoint while reading values of '" + path + "'");
        }
        store.add(path, rows, cols, std::move(data));
    }
    return store;
}

inline void save_params(const ParamStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw load_error("cannot write " + path.string());
    write_params(out, store);
}

inline ParamStore load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw load_error("cannot open " + path.string());
    return read_params(in);
}

} // namespace gnet
