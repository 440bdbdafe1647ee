#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "asds/tensor.hpp"

namespace asds {

/// On-disk tensor container, all fields little-endian:
///   magic "ASDT" | u16 version (=1) | u8 dtype (0=f32, 1=f64) | u8 rank |
///   rank x u64 extents | raw row-major element data.
/// A named-tensor archive is u32 record count, then per record
/// u16 name length | name bytes | tensor container.
inline constexpr std::uint16_t kTensorFormatVersion = 1;

using TensorVariant = std::variant<Tensor<float>, Tensor<double>>;

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 8);
}

inline void get_bytes(std::istream& is, void* p, std::size_t n, std::size_t& offset,
                      const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError(std::string("truncated input while reading ") + what + " at byte offset " +
                          std::to_string(offset));
    offset += n;
}

inline std::uint16_t get_u16(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[2];
    get_bytes(is, b, 2, offset, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[4];
    get_bytes(is, b, 4, offset, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t get_u64(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[8];
    get_bytes(is, b, 8, offset, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 0 : 1;
}

} // namespace detail

template <typename T>
void save_tensor(std::ostream& os, const Tensor<T>& t) {
    detail::put_bytes(os, "ASDT", 4);
    detail::put_u16(os, kTensorFormatVersion);
    const std::uint8_t dtype = detail::dtype_code<T>();
    detail::put_bytes(os, &dtype, 1);
    const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
    detail::put_bytes(os, &rank, 1);
    for (std::size_t e : t.shape()) detail::put_u64(os, e);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const T v = t[i];
        if constexpr (std::is_same_v<T, float>) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            detail::put_u32(os, bits);
        } else {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            detail::put_u64(os, bits);
        }
    }
}

inline void save_tensor(std::ostream& os, const TensorVariant& t) {
    std::visit([&](const auto& x) { save_tensor(os, x); }, t);
}

inline TensorVariant load_tensor(std::istream& is, std::size_t& offset) {
    const std::size_t start = offset;
    char magic[4];
    detail::get_bytes(is, magic, 4, offset, "tensor magic");
    if (std::memcmp(magic, "ASDT", 4) != 0)
        throw FormatError("bad tensor magic at byte offset " + std::to_string(start) +
                          " (expected \"ASDT\")");
    const std::uint16_t version = detail::get_u16(is, offset, "tensor version");
    if (version != kTensorFormatVersion)
        throw FormatError("tensor container version mismatch: expected " +
                          std::to_string(kTensorFormatVersion) + ", found " +
                          std::to_string(version));
    std::uint8_t dtype, rank;
    detail::get_bytes(is, &dtype, 1, offset, "tensor dtype");
    detail::get_bytes(is, &rank, 1, offset, "tensor rank");
    if (dtype > 1)
        throw FormatError("unknown dtype code " + std::to_string(dtype) + " at byte offset " +
                          std::to_string(offset - 2));
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
        e = static_cast<std::size_t>(detail::get_u64(is, offset, "tensor extent"));
        numel *= e;
    }
    auto read_into = [&]<typename T>(Tensor<T>& t) {
        for (std::size_t i = 0; i < numel; ++i) {
            if constexpr (std::is_same_v<T, float>) {
                const std::uint32_t bits = detail::get_u32(is, offset, "tensor data");
                std::memcpy(&t[i], &bits, 4);
            } else {
                const std::uint64_t bits = detail::get_u64(is, offset, "tensor data");
                std::memcpy(&t[i], &bits, 8);
            }
        }
    };
    if (dtype == 0) {
        Tensor<float> t(shape);
        read_into(t);
        return t;
    }
    Tensor<double> t(shape);
    read_into(t);
    return t;
}

/// Ordered collection of named tensors; the unit of model/dataset
/// persistence.
struct NamedTensors {
    std::vector<std::pair<std::string, TensorVariant>> entries;

    template <typename T>
    void add(std::string name, Tensor<T> t) {
        entries.emplace_back(std::move(name), std::move(t));
    }

    const TensorVariant* find(const std::string& name) const {
        for (const auto& [n, t] : entries)
            if (n == name) return &t;
        return nullptr;
    }

    template <typename T>
    const Tensor<T>& get(const std::string& name) const {
        const TensorVariant* v = find(name);
        if (!v) throw FormatError("archive: missing tensor \"" + name + "\"");
        const Tensor<T>* t = std::get_if<Tensor<T>>(v);
        if (!t) throw FormatError("archive: tensor \"" + name + "\" has a different dtype");
        return *t;
    }

    bool operator==(const NamedTensors& o) const { return entries == o.entries; }
};

inline void save_archive(std::ostream& os, const NamedTensors& archive) {
    detail::put_u32(os, static_cast<std::uint32_t>(archive.entries.size()));
    for (const auto& [name, tensor] : archive.entries) {
        detail::put_u16(os, static_cast<std::uint16_t>(name.size()));
        detail::put_bytes(os, name.data(), name.size());
        save_tensor(os, tensor);
    }
}

inline void save_archive(const std::string& path, const NamedTensors& archive) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open \"" + path + "\" for writing");
    save_archive(os, archive);
    if (!os) throw FormatError("write failed for \"" + path + "\"");
}

inline NamedTensors load_archive(std::istream& is) {
    std::size_t offset = 0;
    NamedTensors archive;
    const std::uint32_t count = detail::get_u32(is, offset, "archive record count");
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint16_t len = detail::get_u16(is, offset, "record name length");
        std::string name(len, '\0');
        detail::get_bytes(is, name.data(), len, offset, "record name");
        archive.entries.emplace_back(std::move(name), load_tensor(is, offset));
    }
    return archive;
}

inline NamedTensors load_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open \"" + path + "\" (expected a named-tensor archive)");
    return load_archive(is);
}

} // namespace asds
