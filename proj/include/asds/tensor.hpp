#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "asds/common.hpp"

namespace asds {

/// Dense row-major tensor of float or double. Value semantics; every
/// operation checks shapes and rejects mismatches. The only broadcast in
/// the library is the documented bias-add (matrix + row vector).
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>);

public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_numel(shape_), T(0)) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == checked_numel(shape_), "tensor: element count does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, T v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

    T* row(std::size_t i) { return data_.data() + i * cols(); }
    const T* row(std::size_t i) const { return data_.data() + i * cols(); }

    bool is_scalar() const { return numel() == 1; }
    T item() const {
        require(is_scalar(), "tensor: item() on non-scalar");
        return data_[0];
    }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + "]";
    }

private:
    static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            require(e > 0, "tensor: zero extent in shape");
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename T>
void check_matrix(const Tensor<T>& t, const char* who) {
    require(t.rank() == 2, std::string(who) + ": expected a matrix, got shape " + t.shape_str());
}

} // namespace detail

/// C = A * B for row-major matrices, ikj loop order so the inner loop
/// streams contiguous rows of B and C.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_matrix(a, "matmul");
    detail::check_matrix(b, "matmul");
    require(a.cols() == b.rows(),
            "matmul: inner extents differ, " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c.row(i);
        const T* ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* bp = b.row(p);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
    return c;
}

/// C = A * B^T. Dot-product form; both operands stream along rows.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_matrix(a, "matmul_nt");
    detail::check_matrix(b, "matmul_nt");
    require(a.cols() == b.cols(),
            "matmul_nt: column extents differ, " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b.row(j);
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
    return c;
}

/// C = A^T * B.
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_matrix(a, "matmul_tn");
    detail::check_matrix(b, "matmul_tn");
    require(a.rows() == b.rows(),
            "matmul_tn: row extents differ, " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Tensor<T> c({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const T* ap = a.row(p);
        const T* bp = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const T api = ap[i];
            T* ci = c.row(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
    return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    detail::check_matrix(a, "transpose");
    Tensor<T> c({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(j, i) = a(i, j);
    return c;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.numel(); ++i) c[i] += b[i];
    return c;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.numel(); ++i) c[i] -= b[i];
    return c;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.numel(); ++i) c[i] *= b[i];
    return c;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.numel(); ++i) c[i] *= s;
    return c;
}

/// The documented broadcast: each row of a [n,m] matrix plus an m-vector.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
    detail::check_matrix(a, "add_bias");
    require(bias.rank() == 1 && bias.numel() == a.cols(),
            "add_bias: bias shape " + bias.shape_str() + " does not match columns of " + a.shape_str());
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        T* ci = c.row(i);
        for (std::size_t j = 0; j < c.cols(); ++j) ci[j] += bias[j];
    }
    return c;
}

/// Numerically stable row-wise softmax.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    detail::check_matrix(a, "softmax_rows");
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        T* r = c.row(i);
        T mx = r[0];
        for (std::size_t j = 1; j < c.cols(); ++j) mx = std::max(mx, r[j]);
        T sum = 0;
        for (std::size_t j = 0; j < c.cols(); ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < c.cols(); ++j) r[j] /= sum;
    }
    return c;
}

template <typename T>
std::size_t argmax_row(const Tensor<T>& a, std::size_t i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < a.cols(); ++j)
        if (a(i, j) > a(i, best)) best = j;
    return best;
}

template <typename T>
T sum(const Tensor<T>& a) {
    T s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
    return s;
}

template <typename T>
T sumsq(const Tensor<T>& a) {
    T s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * a[i];
    return s;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    T m = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Euclidean distance between two equal-length rows, accumulated in double.
template <typename T>
double euclidean(const T* a, const T* b, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

template <typename T>
Tensor<T> clip(const Tensor<T>& a, const Tensor<T>& lo, const Tensor<T>& hi) {
    detail::check_matrix(a, "clip");
    require(lo.numel() == a.cols() && hi.numel() == a.cols(), "clip: bound length mismatch");
    Tensor<T> c = a;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        T* r = c.row(i);
        for (std::size_t j = 0; j < c.cols(); ++j) r[j] = std::clamp(r[j], lo[j], hi[j]);
    }
    return c;
}

} // namespace asds
