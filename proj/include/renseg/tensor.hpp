// Dense row-major N-d array. One canonical layout keeps the sweep kernels
// and the naive test oracles directly comparable.

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "renseg/common.hpp"

namespace renseg {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
        validate_shape(shape_);
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape(shape_);
        if (shape_numel(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor full(Shape shape, T fill) { return Tensor(std::move(shape), fill); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    const T* data() const { return data_.data(); }
    T* data() { return data_.data(); }
    const std::vector<T>& vec() const { return data_; }
    std::vector<T>& vec() { return data_; }

    T operator[](std::size_t i) const { return data_[i]; }
    T& operator[](std::size_t i) { return data_[i]; }

    template <typename... Ix>
    T operator()(Ix... ix) const { return data_[offset(ix...)]; }
    template <typename... Ix>
    T& operator()(Ix... ix) { return data_[offset(ix...)]; }

    template <typename... Ix>
    std::size_t offset(Ix... ix) const {
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        constexpr std::size_t n = sizeof...(Ix);
        std::size_t off = 0;
        for (std::size_t a = 0; a < n; ++a) off = off * shape_[a] + idx[a];
        return off;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same buffer under a new shape; element count must be preserved.
    Tensor reshaped(Shape shape) const {
        validate_shape(shape);
        if (shape_numel(shape) != data_.size())
            throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                             " changes element count");
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> d(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(d));
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    static void validate_shape(const Shape& s) {
        for (std::size_t e : s)
            if (e == 0) throw ShapeError("zero or negative extent in shape " + shape_str(s));
    }

    Shape shape_;
    std::vector<T> data_;
};

/// Standard matrix product of [m,k] x [k,n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    if (b.extent(0) != k)
        throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<T> out({m, n}, T(0));
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    // i-k-j order keeps the b row and the out row contiguous.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = pa[i * k + kk];
            const T* brow = pb + kk * n;
            T* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

/// Stacks [Ci,H,W] maps along the channel axis in argument order.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& maps) {
    if (maps.empty()) throw ArgumentError("concat_channels: no inputs");
    for (const auto* m : maps)
        if (m->rank() != 3)
            throw ShapeError("concat_channels expects [C,H,W] maps, got " + shape_str(m->shape()));
    const std::size_t h = maps[0]->extent(1), w = maps[0]->extent(2);
    std::size_t ctotal = 0;
    for (const auto* m : maps) {
        if (m->extent(1) != h || m->extent(2) != w)
            throw ShapeError("concat_channels spatial mismatch: " + shape_str(maps[0]->shape()) +
                             " vs " + shape_str(m->shape()));
        ctotal += m->extent(0);
    }
    Tensor<T> out({ctotal, h, w}, T(0));
    std::size_t coff = 0;
    for (const auto* m : maps) {
        std::copy(m->data(), m->data() + m->size(), out.data() + coff * h * w);
        coff += m->extent(0);
    }
    return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& maps) {
    std::vector<const Tensor<T>*> ptrs;
    ptrs.reserve(maps.size());
    for (const auto& m : maps) ptrs.push_back(&m);
    return concat_channels(ptrs);
}

/// Channel slice [c0, c1) of a [C,H,W] map.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& map, std::size_t c0, std::size_t c1) {
    if (map.rank() != 3) throw ShapeError("slice_channels expects [C,H,W]");
    if (c0 >= c1 || c1 > map.extent(0)) throw ArgumentError("slice_channels: bad channel range");
    const std::size_t hw = map.extent(1) * map.extent(2);
    std::vector<T> d(map.data() + c0 * hw, map.data() + c1 * hw);
    return Tensor<T>({c1 - c0, map.extent(1), map.extent(2)}, std::move(d));
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order) {
    std::vector<std::size_t> inv(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = i;
    return inv;
}

/// out[i_order[0], ..., i_order[r-1]] = in[i_0, ..., i_{r-1}] axis reorder:
/// output axis a takes input axis order[a].
template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<std::size_t>& order) {
    const std::size_t r = t.rank();
    if (order.size() != r) throw ArgumentError("permute: order length != rank");
    std::vector<bool> seen(r, false);
    for (std::size_t a : order) {
        if (a >= r || seen[a]) throw ArgumentError("permute: order is not a permutation of axes");
        seen[a] = true;
    }
    Shape oshape(r);
    for (std::size_t a = 0; a < r; ++a) oshape[a] = t.extent(order[a]);
    Tensor<T> out(oshape, T(0));
    if (r == 0) {
        return out;
    }
    // Strides of the source, walked in output index order.
    std::vector<std::size_t> sstride(r, 1);
    for (std::size_t a = r; a-- > 1;) sstride[a - 1] = sstride[a] * t.extent(a);
    std::vector<std::size_t> walk(r);
    for (std::size_t a = 0; a < r; ++a) walk[a] = sstride[order[a]];
    std::vector<std::size_t> idx(r, 0);
    T* po = out.data();
    const T* pi = t.data();
    std::size_t soff = 0;
    for (std::size_t o = 0; o < out.size(); ++o) {
        po[o] = pi[soff];
        for (std::size_t a = r; a-- > 0;) {
            ++idx[a];
            soff += walk[a];
            if (idx[a] < oshape[a]) break;
            soff -= walk[a] * oshape[a];
            idx[a] = 0;
        }
    }
    return out;
}

}  // namespace renseg
