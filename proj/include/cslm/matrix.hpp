#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cslm {

// Dense row-major matrix. Training runs on float; gradient checks
// instantiate Mat<double>. The CSLM_REAL64 build flag switches the
// whole artifact to double.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}
    Mat(int r, int c, std::initializer_list<T> vals) : rows(r), cols(c), data(vals) {
        if (data.size() != static_cast<size_t>(r) * c)
            throw std::invalid_argument("Mat: initializer size does not match " +
                                        std::to_string(r) + "x" + std::to_string(c));
    }

    T& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const T& operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    T* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const T* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

#ifdef CSLM_REAL64
using real = double;
#else
using real = float;
#endif

using Matrix = Mat<real>;

} // namespace cslm
