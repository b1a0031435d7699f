#pragma once

// Word-level LSTM language model: embedding -> dropout -> single LSTM
// layer -> dropout -> output projection. Gate block order is (i, f, g, o)
// and is recorded in checkpoints. Templated so gradient checks can run the
// whole unrolled network at 64-bit.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/matrix.hpp"
#include "cslm/numcore.hpp"
#include "cslm/rng.hpp"

namespace cslm {

struct ModelDims {
    int vocab = 0;
    int emb_dim = 300;
    int hidden_dim = 650;
};

template <typename T>
struct LstmParamsT {
    Mat<T> emb;   // [V x emb]
    Mat<T> w_ih;  // [4h x emb]
    Mat<T> w_hh;  // [4h x h]
    Mat<T> b_ih;  // [4h x 1]
    Mat<T> b_hh;  // [4h x 1]
    Mat<T> w_out; // [V x h]
    Mat<T> b_out; // [V x 1]

    ModelDims dims() const {
        return {emb.rows, emb.cols, w_hh.cols};
    }

    std::vector<ParamSlot<T>> slots(LstmParamsT<T>& grads) {
        return {{&emb, &grads.emb, "emb"},     {&w_ih, &grads.w_ih, "w_ih"},
                {&w_hh, &grads.w_hh, "w_hh"},  {&b_ih, &grads.b_ih, "b_ih"},
                {&b_hh, &grads.b_hh, "b_hh"},  {&w_out, &grads.w_out, "w_out"},
                {&b_out, &grads.b_out, "b_out"}};
    }

    void zero_all() {
        emb.zero(); w_ih.zero(); w_hh.zero(); b_ih.zero(); b_hh.zero();
        w_out.zero(); b_out.zero();
    }
};

using LstmParams = LstmParamsT<real>;

template <typename T>
struct HiddenT {
    Mat<T> h; // [batch x hidden]
    Mat<T> c;
};

using Hidden = HiddenT<real>;

template <typename T>
LstmParamsT<T> shaped_params(const ModelDims& d) {
    LstmParamsT<T> p;
    p.emb = Mat<T>(d.vocab, d.emb_dim);
    p.w_ih = Mat<T>(4 * d.hidden_dim, d.emb_dim);
    p.w_hh = Mat<T>(4 * d.hidden_dim, d.hidden_dim);
    p.b_ih = Mat<T>(4 * d.hidden_dim, 1);
    p.b_hh = Mat<T>(4 * d.hidden_dim, 1);
    p.w_out = Mat<T>(d.vocab, d.hidden_dim);
    p.b_out = Mat<T>(d.vocab, 1);
    return p;
}

// Weights uniform in [-0.1, 0.1], biases zero.
template <typename T>
LstmParamsT<T> init_params(const ModelDims& d, uint64_t seed) {
    LstmParamsT<T> p = shaped_params<T>(d);
    Rng rng(seed);
    auto fill_uniform = [&rng](Mat<T>& m) {
        for (auto& v : m.data) v = static_cast<T>(rng.uniform(-0.1, 0.1));
    };
    fill_uniform(p.emb);
    fill_uniform(p.w_ih);
    fill_uniform(p.w_hh);
    fill_uniform(p.w_out);
    return p;
}

template <typename T>
HiddenT<T> zero_state(int batch_size, const ModelDims& d) {
    if (batch_size < 1) throw std::invalid_argument("zero_state: batch_size must be >= 1");
    return {Mat<T>(batch_size, d.hidden_dim), Mat<T>(batch_size, d.hidden_dim)};
}

// The carried state crosses batch boundaries as a constant: the next
// batch's backward pass stops here.
template <typename T>
HiddenT<T> detach(const HiddenT<T>& s) {
    return {s.h, s.c};
}

namespace detail {

// Per-step tensors saved by the forward pass for backprop.
template <typename T>
struct StepCache {
    std::vector<int32_t> ids;
    Mat<T> x_drop;   // embedded input after dropout
    Mat<T> x_mask;
    Mat<T> h_prev;
    Mat<T> c_prev;
    Mat<T> gates;    // [batch x 4h], activated, blocks i|f|g|o
    Mat<T> tanh_c;
    Mat<T> h_drop;   // LSTM output after dropout (projection input)
    Mat<T> h_mask;
};

// One LSTM step. Gate preactivations a = xd*W_ih^T + h*W_hh^T + b_ih + b_hh;
// i,f,o through sigmoid, g through tanh; c' = f.c + i.g; h' = o.tanh(c').
// w_ih_t/w_hh_t are the transposed weights, shared across steps.
template <typename T>
void lstm_step(const Mat<T>& w_ih_t, const Mat<T>& w_hh_t, const Mat<T>& b_ih, const Mat<T>& b_hh,
               const Mat<T>& x_drop, const Mat<T>& h_prev, const Mat<T>& c_prev,
               Mat<T>& gates, Mat<T>& c_new, Mat<T>& tanh_c, Mat<T>& h_new) {
    const int batch = x_drop.rows;
    const int h4 = w_ih_t.cols;
    const int hid = h4 / 4;
    matmul_into(x_drop, w_ih_t, gates);
    matmul_acc(h_prev, w_hh_t, gates);
    for (int b = 0; b < batch; ++b) {
        T* g = gates.row(b);
        for (int j = 0; j < h4; ++j) g[j] += b_ih.data[j] + b_hh.data[j];
    }
    if (c_new.rows != batch || c_new.cols != hid) c_new = Mat<T>(batch, hid);
    if (tanh_c.rows != batch || tanh_c.cols != hid) tanh_c = Mat<T>(batch, hid);
    if (h_new.rows != batch || h_new.cols != hid) h_new = Mat<T>(batch, hid);
    for (int b = 0; b < batch; ++b) {
        T* g = gates.row(b);
        const T* cp = c_prev.row(b);
        T* cn = c_new.row(b);
        T* tc = tanh_c.row(b);
        T* hn = h_new.row(b);
        for (int j = 0; j < hid; ++j) {
            const T gi = sigmoid_scalar(g[j]);
            const T gf = sigmoid_scalar(g[hid + j]);
            const T gg = std::tanh(g[2 * hid + j]);
            const T go = sigmoid_scalar(g[3 * hid + j]);
            g[j] = gi;
            g[hid + j] = gf;
            g[2 * hid + j] = gg;
            g[3 * hid + j] = go;
            cn[j] = gf * cp[j] + gi * gg;
            tc[j] = std::tanh(cn[j]);
            hn[j] = go * tc[j];
        }
    }
}

} // namespace detail

template <typename T>
struct ForwardResult {
    Mat<T> logits; // [(steps*batch) x V], step-major rows
    HiddenT<T> state;
};

// Forward pass only; caches omitted. Used for evaluation and tests.
template <typename T>
ForwardResult<T> forward(const LstmParamsT<T>& p, const Batch& batch, const HiddenT<T>& state,
                         Mode mode, double p_drop, Rng& rng) {
    const ModelDims d = p.dims();
    if (state.h.rows != batch.batch_size || state.h.cols != d.hidden_dim)
        throw std::invalid_argument("forward: state shape " + state.h.shape_str() +
                                    " does not match batch_size " + std::to_string(batch.batch_size) +
                                    " x hidden " + std::to_string(d.hidden_dim));
    const Mat<T> w_ih_t = transpose(p.w_ih);
    const Mat<T> w_hh_t = transpose(p.w_hh);
    const Mat<T> w_out_t = transpose(p.w_out);

    ForwardResult<T> out;
    out.logits = Mat<T>(batch.steps * batch.batch_size, d.vocab);
    Mat<T> h = state.h;
    Mat<T> c = state.c;
    Mat<T> gates, c_new, tanh_c, h_new, proj;
    for (int t = 0; t < batch.steps; ++t) {
        std::vector<int32_t> ids(batch.input.begin() + static_cast<size_t>(t) * batch.batch_size,
                                 batch.input.begin() + static_cast<size_t>(t + 1) * batch.batch_size);
        Mat<T> x = embedding_lookup(p.emb, ids);
        auto xd = dropout(x, p_drop, mode, rng);
        detail::lstm_step(w_ih_t, w_hh_t, p.b_ih, p.b_hh, xd.y, h, c, gates, c_new, tanh_c, h_new);
        auto hd = dropout(h_new, p_drop, mode, rng);
        matmul_into(hd.y, w_out_t, proj);
        for (int b = 0; b < batch.batch_size; ++b) {
            T* dst = out.logits.row(t * batch.batch_size + b);
            const T* src = proj.row(b);
            for (int j = 0; j < d.vocab; ++j) dst[j] = src[j] + p.b_out.data[j];
        }
        h = h_new;
        c = c_new;
    }
    out.state = {std::move(h), std::move(c)};
    return out;
}

template <typename T>
struct LossResult {
    AccT<T> loss = 0; // mean cross-entropy, nats per position
    HiddenT<T> state;
};

// Forward + full backpropagation through this batch's unrolled steps.
// Gradients are accumulated into `grads` (zeroed here). The incoming state
// is treated as a constant, which is the truncation boundary.
template <typename T>
LossResult<T> loss_and_grads(const LstmParamsT<T>& p, const Batch& batch, const HiddenT<T>& state,
                             Mode mode, double p_drop, Rng& rng, LstmParamsT<T>& grads) {
    const ModelDims d = p.dims();
    const int hid = d.hidden_dim;
    const int bs = batch.batch_size;
    if (state.h.rows != bs || state.h.cols != hid)
        throw std::invalid_argument("loss_and_grads: state shape mismatch");
    if (grads.emb.rows != d.vocab) grads = shaped_params<T>(d);
    else grads.zero_all();

    const Mat<T> w_ih_t = transpose(p.w_ih);
    const Mat<T> w_hh_t = transpose(p.w_hh);
    const Mat<T> w_out_t = transpose(p.w_out);

    // ---- forward, caching per-step tensors ----
    std::vector<detail::StepCache<T>> steps(batch.steps);
    Mat<T> logits(batch.steps * bs, d.vocab);
    Mat<T> h = state.h;
    Mat<T> c = state.c;
    Mat<T> proj;
    for (int t = 0; t < batch.steps; ++t) {
        auto& sc = steps[t];
        sc.ids.assign(batch.input.begin() + static_cast<size_t>(t) * bs,
                      batch.input.begin() + static_cast<size_t>(t + 1) * bs);
        Mat<T> x = embedding_lookup(p.emb, sc.ids);
        auto xd = dropout(x, p_drop, mode, rng);
        sc.x_drop = std::move(xd.y);
        sc.x_mask = std::move(xd.mask);
        sc.h_prev = h;
        sc.c_prev = c;
        Mat<T> c_new, tanh_c, h_new;
        detail::lstm_step(w_ih_t, w_hh_t, p.b_ih, p.b_hh, sc.x_drop, h, c,
                          sc.gates, c_new, sc.tanh_c, h_new);
        auto hd = dropout(h_new, p_drop, mode, rng);
        sc.h_drop = std::move(hd.y);
        sc.h_mask = std::move(hd.mask);
        matmul_into(sc.h_drop, w_out_t, proj);
        for (int b = 0; b < bs; ++b) {
            T* dst = logits.row(t * bs + b);
            const T* src = proj.row(b);
            for (int j = 0; j < d.vocab; ++j) dst[j] = src[j] + p.b_out.data[j];
        }
        h = std::move(h_new);
        c = std::move(c_new);
    }

    std::vector<int32_t> flat_targets(batch.target.begin(), batch.target.end());
    auto xent = softmax_cross_entropy(logits, flat_targets);

    // ---- backward through time ----
    Mat<T> dh_next(bs, hid);
    Mat<T> dc_next(bs, hid);
    Mat<T> dlog_t(bs, d.vocab);
    Mat<T> dh(bs, hid), dgates(bs, 4 * hid), dx(bs, d.emb_dim);
    for (int t = batch.steps - 1; t >= 0; --t) {
        auto& sc = steps[t];
        for (int b = 0; b < bs; ++b) {
            const T* src = xent.dlogits.row(t * bs + b);
            T* dst = dlog_t.row(b);
            std::copy(src, src + d.vocab, dst);
        }
        // projection: logits = h_drop * W_out^T + b_out
        matmul_into(transpose(dlog_t), sc.h_drop, proj); // dW_out contribution
        for (size_t i = 0; i < grads.w_out.size(); ++i) grads.w_out.data[i] += proj.data[i];
        for (int b = 0; b < bs; ++b) {
            const T* src = dlog_t.row(b);
            for (int j = 0; j < d.vocab; ++j) grads.b_out.data[j] += src[j];
        }
        matmul_into(dlog_t, p.w_out, dh); // into h_drop
        // h_drop = mask . h_new ; recurrent path adds dh_next
        for (size_t i = 0; i < dh.size(); ++i)
            dh.data[i] = dh.data[i] * sc.h_mask.data[i] + dh_next.data[i];
        // h_new = o . tanh(c_new)
        for (int b = 0; b < bs; ++b) {
            const T* g = sc.gates.row(b);
            const T* tc = sc.tanh_c.row(b);
            const T* cp = sc.c_prev.row(b);
            const T* dhr = dh.row(b);
            T* dcn = dc_next.row(b);
            T* dg = dgates.row(b);
            for (int j = 0; j < hid; ++j) {
                const T gi = g[j], gf = g[hid + j], gg = g[2 * hid + j], go = g[3 * hid + j];
                const T dc = dcn[j] + dhr[j] * go * (T(1) - tc[j] * tc[j]);
                const T d_i = dc * gg;
                const T d_f = dc * cp[j];
                const T d_g = dc * gi;
                const T d_o = dhr[j] * tc[j];
                dg[j] = d_i * gi * (T(1) - gi);
                dg[hid + j] = d_f * gf * (T(1) - gf);
                dg[2 * hid + j] = d_g * (T(1) - gg * gg);
                dg[3 * hid + j] = d_o * go * (T(1) - go);
                dcn[j] = dc * gf; // becomes dc_prev
            }
        }
        const Mat<T> dgates_t = transpose(dgates);
        matmul_acc(dgates_t, sc.x_drop, grads.w_ih);
        matmul_acc(dgates_t, sc.h_prev, grads.w_hh);
        for (int b = 0; b < bs; ++b) {
            const T* dg = dgates.row(b);
            for (int j = 0; j < 4 * hid; ++j) {
                grads.b_ih.data[j] += dg[j];
                grads.b_hh.data[j] += dg[j];
            }
        }
        matmul_into(dgates, p.w_hh, dh_next); // dh_prev for step t-1
        matmul_into(dgates, p.w_ih, dx);
        for (size_t i = 0; i < dx.size(); ++i) dx.data[i] *= sc.x_mask.data[i];
        embedding_backward_into(dx, sc.ids, grads.emb);
    }

    LossResult<T> out;
    out.loss = xent.loss;
    out.state = {std::move(h), std::move(c)};
    return out;
}

} // namespace cslm
