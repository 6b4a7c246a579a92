// Binary tensor container.
//
// One record is: magic "RNSEG1", rank (u32 LE), extents (u32 LE each),
// precision tag (u8, 4 = float or 8 = double), then the raw little-endian
// payload. A checkpoint file is a sequence of named records, each prefixed
// with (u32 LE name length, name bytes).

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "renseg/tensor.hpp"

namespace renseg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr char kTensorMagic[6] = {'R', 'N', 'S', 'E', 'G', '1'};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw IoError(std::string("truncated tensor record while reading ") + what);
    return v;
}

}  // namespace detail

template <typename T>
void save_tensor(std::ostream& os, const Tensor<T>& t) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    os.write(kTensorMagic, 6);
    detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t a = 0; a < t.rank(); ++a)
        detail::write_u32(os, static_cast<std::uint32_t>(t.extent(a)));
    const std::uint8_t tag = sizeof(T);
    os.write(reinterpret_cast<const char*>(&tag), 1);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!os) throw IoError("failed to write tensor record");
}

/// Reads one record, converting the stored precision to T if they differ.
template <typename T>
Tensor<T> load_tensor(std::istream& is) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    char magic[6];
    is.read(magic, 6);
    if (!is || std::memcmp(magic, kTensorMagic, 6) != 0)
        throw IoError("bad tensor magic (expected RNSEG1)");
    const std::uint32_t rank = detail::read_u32(is, "rank");
    if (rank > 8) throw IoError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
        shape[a] = detail::read_u32(is, "extent");
        if (shape[a] == 0) throw IoError("zero extent in tensor record");
        numel *= shape[a];
    }
    std::uint8_t tag = 0;
    is.read(reinterpret_cast<char*>(&tag), 1);
    if (!is || (tag != 4 && tag != 8)) throw IoError("bad precision tag in tensor record");
    if (tag == sizeof(T)) {
        std::vector<T> data(numel);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(T)));
        if (!is) throw IoError("truncated tensor payload");
        return Tensor<T>(std::move(shape), std::move(data));
    }
    if (tag == 4) {
        std::vector<float> data(numel);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!is) throw IoError("truncated tensor payload");
        return Tensor<float>(std::move(shape), std::move(data)).template cast<T>();
    }
    std::vector<double> data(numel);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!is) throw IoError("truncated tensor payload");
    return Tensor<double>(std::move(shape), std::move(data)).template cast<T>();
}

template <typename T>
void save_tensor_file(const std::string& path, const Tensor<T>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    save_tensor(os, t);
}

template <typename T>
Tensor<T> load_tensor_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return load_tensor<T>(is);
}

/// Ordered name -> tensor checkpoint. Order is preserved so that save/load
/// round-trips are byte-stable.
template <typename T>
struct NamedTensors {
    std::vector<std::pair<std::string, Tensor<T>>> items;

    const Tensor<T>* find(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }
    void add(std::string name, Tensor<T> t) { items.emplace_back(std::move(name), std::move(t)); }
};

template <typename T>
void save_checkpoint(const std::string& path, const NamedTensors<T>& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (const auto& [name, t] : ckpt.items) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        save_tensor(os, t);
    }
}

template <typename T>
NamedTensors<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    NamedTensors<T> out;
    while (true) {
        std::uint32_t len = 0;
        is.read(reinterpret_cast<char*>(&len), 4);
        if (is.eof()) break;
        if (!is || len > 4096) throw IoError("bad name record in checkpoint " + path);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw IoError("truncated name in checkpoint " + path);
        out.add(std::move(name), load_tensor<T>(is));
    }
    return out;
}

}  // namespace renseg
