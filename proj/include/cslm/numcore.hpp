#pragma once

// Dense numeric kernel: every primitive the model needs, each with an
// explicit backward. All reductions run in a fixed order so results are
// bitwise reproducible for a given build.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cslm/matrix.hpp"
#include "cslm/rng.hpp"

namespace cslm {

enum class Mode { Train, Eval };

// reduction type: float accumulates in double, wider types in themselves
template <typename T>
using AccT = std::conditional_t<std::is_same_v<T, float>, double, T>;

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
    Mat<T> t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j)
            t(j, i) = a(i, j);
    return t;
}

// C = A * B. ikj loop order: the inner j loop streams both C and B rows,
// which the compiler vectorizes.
template <typename T>
void matmul_into(const Mat<T>& a, const Mat<T>& b, Mat<T>& c) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    a.shape_str() + " * " + b.shape_str());
    if (c.rows != a.rows || c.cols != b.cols) c = Mat<T>(a.rows, b.cols);
    else c.zero();
    for (int i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        const T* arow = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T av = arow[k];
            const T* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    Mat<T> c;
    matmul_into(a, b, c);
    return c;
}

// C += A * B
template <typename T>
void matmul_acc(const Mat<T>& a, const Mat<T>& b, Mat<T>& c) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    a.shape_str() + " * " + b.shape_str());
    if (c.rows != a.rows || c.cols != b.cols)
        throw std::invalid_argument("matmul_acc: output shape " + c.shape_str() +
                                    " does not match " + std::to_string(a.rows) + "x" +
                                    std::to_string(b.cols));
    for (int i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        const T* arow = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T av = arow[k];
            const T* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// dC -> (dA, dB) for C = A * B: dA = dC * B^T, dB = A^T * dC.
template <typename T>
std::pair<Mat<T>, Mat<T>> matmul_backward(const Mat<T>& dc, const Mat<T>& a, const Mat<T>& b) {
    return {matmul(dc, transpose(b)), matmul(transpose(a), dc)};
}

template <typename T>
inline T sigmoid_scalar(T x) {
    // split form keeps exp() arguments non-positive, so saturation is exact
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& x) {
    Mat<T> y(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = sigmoid_scalar(x.data[i]);
    return y;
}

// dy ⊙ σ'(x) expressed through the forward output: σ' = y(1−y)
template <typename T>
Mat<T> sigmoid_backward(const Mat<T>& dy, const Mat<T>& y) {
    Mat<T> dx(y.rows, y.cols);
    for (size_t i = 0; i < y.size(); ++i)
        dx.data[i] = dy.data[i] * y.data[i] * (T(1) - y.data[i]);
    return dx;
}

template <typename T>
Mat<T> tanh_m(const Mat<T>& x) {
    Mat<T> y(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    return y;
}

// tanh' = 1 − y²
template <typename T>
Mat<T> tanh_backward(const Mat<T>& dy, const Mat<T>& y) {
    Mat<T> dx(y.rows, y.cols);
    for (size_t i = 0; i < y.size(); ++i)
        dx.data[i] = dy.data[i] * (T(1) - y.data[i] * y.data[i]);
    return dx;
}

// Fused softmax + mean cross-entropy over rows of `logits`.
// loss = −(1/n) Σ_i log softmax(logits_i)[target_i]
// dlogits = (softmax − onehot) / n
template <typename T>
struct SoftmaxXentResult {
    AccT<T> loss = 0;
    Mat<T> dlogits;
};

template <typename T>
SoftmaxXentResult<T> softmax_cross_entropy(const Mat<T>& logits, const std::vector<int32_t>& targets) {
    const int n = logits.rows;
    const int v = logits.cols;
    if (n < 1) throw std::invalid_argument("softmax_cross_entropy: no rows");
    if (static_cast<int>(targets.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(n) + " rows");
    using Acc = AccT<T>;
    SoftmaxXentResult<T> out;
    out.dlogits = Mat<T>(n, v);
    Acc total = 0;
    const T inv_n = T(1) / static_cast<T>(n);
    for (int i = 0; i < n; ++i) {
        const int32_t t = targets[i];
        if (t < 0 || t >= v)
            throw std::invalid_argument("softmax_cross_entropy: target id " + std::to_string(t) +
                                        " out of range [0," + std::to_string(v) + ")");
        const T* lr = logits.row(i);
        T mx = lr[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, lr[j]);
        Acc sum = 0;
        for (int j = 0; j < v; ++j) sum += std::exp(static_cast<Acc>(lr[j] - mx));
        total += std::log(sum) - static_cast<Acc>(lr[t] - mx);
        T* dr = out.dlogits.row(i);
        const T inv_sum = static_cast<T>(Acc(1) / sum);
        for (int j = 0; j < v; ++j)
            dr[j] = std::exp(lr[j] - mx) * inv_sum * inv_n;
        dr[t] -= inv_n;
    }
    out.loss = total / n;
    return out;
}

// Evaluation path: total cross-entropy (nats) without gradient buffers.
template <typename T>
AccT<T> cross_entropy_sum(const Mat<T>& logits, const std::vector<int32_t>& targets) {
    using Acc = AccT<T>;
    const int n = logits.rows;
    const int v = logits.cols;
    if (static_cast<int>(targets.size()) != n)
        throw std::invalid_argument("cross_entropy_sum: target count mismatch");
    Acc total = 0;
    for (int i = 0; i < n; ++i) {
        const int32_t t = targets[i];
        if (t < 0 || t >= v)
            throw std::invalid_argument("cross_entropy_sum: target id out of range");
        const T* lr = logits.row(i);
        T mx = lr[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, lr[j]);
        Acc sum = 0;
        for (int j = 0; j < v; ++j) sum += std::exp(static_cast<Acc>(lr[j] - mx));
        total += std::log(sum) - static_cast<Acc>(lr[t] - mx);
    }
    return total;
}

// Row-wise softmax (diagnostics and tests).
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits) {
    Mat<T> p(logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        const T* lr = logits.row(i);
        T* pr = p.row(i);
        T mx = lr[0];
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j]);
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            pr[j] = std::exp(lr[j] - mx);
            sum += static_cast<double>(pr[j]);
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (int j = 0; j < logits.cols; ++j) pr[j] *= inv;
    }
    return p;
}

// Row gather: out[i] = E[ids[i]].
template <typename T>
Mat<T> embedding_lookup(const Mat<T>& e, const std::vector<int32_t>& ids) {
    Mat<T> out(static_cast<int>(ids.size()), e.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        const int32_t id = ids[i];
        if (id < 0 || id >= e.rows)
            throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                        " out of range [0," + std::to_string(e.rows) + ")");
        const T* src = e.row(id);
        T* dst = out.row(static_cast<int>(i));
        std::copy(src, src + e.cols, dst);
    }
    return out;
}

// Scatter-add: dE[ids[i]] += dy[i]. Duplicate ids accumulate.
template <typename T>
void embedding_backward_into(const Mat<T>& dy, const std::vector<int32_t>& ids, Mat<T>& de) {
    if (dy.rows != static_cast<int>(ids.size()) || dy.cols != de.cols)
        throw std::invalid_argument("embedding_backward: shape mismatch");
    for (size_t i = 0; i < ids.size(); ++i) {
        const int32_t id = ids[i];
        if (id < 0 || id >= de.rows)
            throw std::invalid_argument("embedding_backward: id out of range");
        const T* src = dy.row(static_cast<int>(i));
        T* dst = de.row(id);
        for (int j = 0; j < de.cols; ++j) dst[j] += src[j];
    }
}

// Inverted dropout. The returned mask holds 0 or 1/(1−p), so backward is a
// plain elementwise product and evaluation needs no rescaling.
template <typename T>
struct DropoutResult {
    Mat<T> y;
    Mat<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const Mat<T>& x, double p, Mode mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
    DropoutResult<T> out;
    out.y = Mat<T>(x.rows, x.cols);
    out.mask = Mat<T>(x.rows, x.cols);
    if (mode == Mode::Eval || p == 0.0) {
        out.y = x;
        out.mask.fill(T(1));
        return out;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (size_t i = 0; i < x.size(); ++i) {
        const T m = rng.next_double() < p ? T(0) : scale;
        out.mask.data[i] = m;
        out.y.data[i] = x.data[i] * m;
    }
    return out;
}

template <typename T>
Mat<T> dropout_backward(const Mat<T>& dy, const Mat<T>& mask) {
    if (!dy.same_shape(mask))
        throw std::invalid_argument("dropout_backward: shape mismatch");
    Mat<T> dx(dy.rows, dy.cols);
    for (size_t i = 0; i < dy.size(); ++i) dx.data[i] = dy.data[i] * mask.data[i];
    return dx;
}

// Element-mean squared error. N is the element count of one operand, so the
// loss scale does not depend on how many rows are compared.
template <typename T>
struct MseResult {
    AccT<T> loss = 0;
    Mat<T> da;
    Mat<T> db;
};

template <typename T>
MseResult<T> mse(const Mat<T>& a, const Mat<T>& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mse: shape mismatch, " + a.shape_str() + " vs " + b.shape_str());
    using Acc = AccT<T>;
    MseResult<T> out;
    out.da = Mat<T>(a.rows, a.cols);
    out.db = Mat<T>(a.rows, a.cols);
    const Acc n = static_cast<Acc>(a.size());
    Acc total = 0;
    const T two_over_n = static_cast<T>(Acc(2) / n);
    for (size_t i = 0; i < a.size(); ++i) {
        const Acc d = static_cast<Acc>(a.data[i]) - static_cast<Acc>(b.data[i]);
        total += d * d;
        const T g = two_over_n * static_cast<T>(a.data[i] - b.data[i]);
        out.da.data[i] = g;
        out.db.data[i] = -g;
    }
    out.loss = total / n;
    return out;
}

// One named parameter/gradient pair for the optimizer step.
template <typename T>
struct ParamSlot {
    Mat<T>* param;
    Mat<T>* grad;
    const char* name;
};

// Global-norm gradient clipping followed by an SGD step, in place.
// Returns the pre-clip global L2 norm.
template <typename T>
double clip_and_step(std::vector<ParamSlot<T>>& slots, double lr, double clip_norm) {
    if (lr <= 0.0) throw std::invalid_argument("clip_and_step: lr must be positive");
    if (clip_norm <= 0.0) throw std::invalid_argument("clip_and_step: clip_norm must be positive");
    double sq = 0.0;
    for (auto& s : slots) {
        if (!s.param->same_shape(*s.grad))
            throw std::invalid_argument(std::string("clip_and_step: shape mismatch for ") + s.name);
        for (T g : s.grad->data) {
            const double gd = static_cast<double>(g);
            if (!std::isfinite(gd))
                throw std::runtime_error(std::string("clip_and_step: non-finite gradient in ") + s.name);
            sq += gd * gd;
        }
    }
    const double norm = std::sqrt(sq);
    const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
    const T step = static_cast<T>(lr * scale);
    for (auto& s : slots) {
        T* p = s.param->data.data();
        const T* g = s.grad->data.data();
        const size_t n = s.param->size();
        for (size_t i = 0; i < n; ++i) p[i] -= step * g[i];
    }
    return norm;
}

} // namespace cslm
