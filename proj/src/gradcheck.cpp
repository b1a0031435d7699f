#include "cslm/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "cslm/corpus.hpp"
#include "cslm/matrix.hpp"
#include "cslm/model.hpp"
#include "cslm/numcore.hpp"
#include "cslm/rng.hpp"
#include "cslm/training.hpp"
#include "cslm/vocab.hpp"

namespace cslm {

namespace {

constexpr double kTol = 1e-5;
constexpr double kStep = 1e-6;

Mat<double> random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
    Mat<double> m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-scale, scale);
    return m;
}

double weighted_sum(const Mat<double>& w, const Mat<double>& y) {
    double s = 0.0;
    for (size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
    return s;
}

// max over elements of |fd - analytic| / max(eps, |fd| + |analytic|)
double fd_against(Mat<double>& x, const Mat<double>& analytic,
                  const std::function<double()>& loss) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + kStep;
        const double lp = loss();
        x.data[i] = keep - kStep;
        const double lm = loss();
        x.data[i] = keep;
        const double fd = (lp - lm) / (2.0 * kStep);
        const double a = analytic.data[i];
        const double denom = std::max(1e-8, std::abs(fd) + std::abs(a));
        worst = std::max(worst, std::abs(fd - a) / denom);
    }
    return worst;
}

GradCheckResult make_result(const std::string& name, double err) {
    return {name, err, kTol, err < kTol};
}

GradCheckResult check_matmul(bool corrupt) {
    Rng rng(11);
    Mat<double> a = random_mat(rng, 4, 3);
    Mat<double> b = random_mat(rng, 3, 5);
    const Mat<double> w = random_mat(rng, 4, 5);
    auto [da, db] = matmul_backward(w, a, b);
    if (corrupt)
        for (auto& v : da.data) v *= 1.02;
    auto loss = [&] { return weighted_sum(w, matmul(a, b)); };
    const double err = std::max(fd_against(a, da, loss), fd_against(b, db, loss));
    return make_result(corrupt ? "negative-control(corrupted-matmul-backward)" : "matmul", err);
}

GradCheckResult check_sigmoid() {
    Rng rng(12);
    Mat<double> x = random_mat(rng, 3, 4, 2.0);
    const Mat<double> w = random_mat(rng, 3, 4);
    const Mat<double> y = sigmoid(x);
    const Mat<double> dx = sigmoid_backward(w, y);
    auto loss = [&] { return weighted_sum(w, sigmoid(x)); };
    return make_result("sigmoid", fd_against(x, dx, loss));
}

GradCheckResult check_tanh() {
    Rng rng(13);
    Mat<double> x = random_mat(rng, 3, 4, 2.0);
    const Mat<double> w = random_mat(rng, 3, 4);
    const Mat<double> y = tanh_m(x);
    const Mat<double> dx = tanh_backward(w, y);
    auto loss = [&] { return weighted_sum(w, tanh_m(x)); };
    return make_result("tanh", fd_against(x, dx, loss));
}

GradCheckResult check_softmax_xent() {
    Rng rng(14);
    Mat<double> logits = random_mat(rng, 6, 7, 3.0);
    std::vector<int32_t> targets;
    for (int i = 0; i < 6; ++i) targets.push_back(static_cast<int32_t>(rng.next_below(7)));
    const auto res = softmax_cross_entropy(logits, targets);
    auto loss = [&] { return softmax_cross_entropy(logits, targets).loss; };
    return make_result("softmax_cross_entropy", fd_against(logits, res.dlogits, loss));
}

GradCheckResult check_embedding() {
    Rng rng(15);
    Mat<double> e = random_mat(rng, 6, 4);
    const std::vector<int32_t> ids = {1, 1, 3, 0, 5}; // duplicates must accumulate
    const Mat<double> w = random_mat(rng, 5, 4);
    Mat<double> de(6, 4);
    embedding_backward_into(w, ids, de);
    auto loss = [&] { return weighted_sum(w, embedding_lookup(e, ids)); };
    return make_result("embedding_lookup", fd_against(e, de, loss));
}

GradCheckResult check_dropout() {
    Rng rng(16);
    Mat<double> x = random_mat(rng, 4, 5);
    const Mat<double> w = random_mat(rng, 4, 5);
    auto apply = [&] {
        Rng drop(99); // same mask on every evaluation
        return dropout(x, 0.3, Mode::Train, drop);
    };
    const auto res = apply();
    const Mat<double> dx = dropout_backward(w, res.mask);
    auto loss = [&] { return weighted_sum(w, apply().y); };
    return make_result("dropout", fd_against(x, dx, loss));
}

GradCheckResult check_mse() {
    Rng rng(17);
    Mat<double> a = random_mat(rng, 3, 4);
    Mat<double> b = random_mat(rng, 3, 4);
    const auto res = mse(a, b);
    auto loss = [&] { return mse(a, b).loss; };
    const double err =
        std::max(fd_against(a, res.da, loss), fd_against(b, res.db, loss));
    return make_result("mse", err);
}

struct TinyModel {
    LstmParamsT<double> params;
    Batch batch;
    HiddenT<double> state;
};

// the acceptance-scale tiny network: V=5, emb=3, h=4, 2 steps, batch 2
TinyModel tiny_model(uint64_t seed) {
    TinyModel m;
    const ModelDims dims{5, 3, 4};
    m.params = init_params<double>(dims, seed);
    Rng rng(seed + 1);
    m.batch.steps = 2;
    m.batch.batch_size = 2;
    for (int i = 0; i < 4; ++i) {
        m.batch.input.push_back(static_cast<int32_t>(rng.next_below(5)));
        m.batch.target.push_back(static_cast<int32_t>(rng.next_below(5)));
    }
    m.state.h = random_mat(rng, 2, 4, 0.5);
    m.state.c = random_mat(rng, 2, 4, 0.5);
    return m;
}

// The model composes dozens of ops, so the loss carries O(1) magnitude while
// some gradient components are ~1e-6; double-precision differences would
// drown those in cancellation noise. The FD reference therefore runs the
// same computation at long double. The analytic gradients under test stay
// 64-bit.
using ldbl = long double;

template <typename T>
Mat<T> cast_mat(const Mat<double>& a) {
    Mat<T> b(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) b.data[i] = static_cast<T>(a.data[i]);
    return b;
}

template <typename T>
LstmParamsT<T> cast_params(const LstmParamsT<double>& p) {
    LstmParamsT<T> out;
    out.emb = cast_mat<T>(p.emb);
    out.w_ih = cast_mat<T>(p.w_ih);
    out.w_hh = cast_mat<T>(p.w_hh);
    out.b_ih = cast_mat<T>(p.b_ih);
    out.b_hh = cast_mat<T>(p.b_hh);
    out.w_out = cast_mat<T>(p.w_out);
    out.b_out = cast_mat<T>(p.b_out);
    return out;
}

double fd_against_ld(Mat<ldbl>& x, const Mat<double>& analytic,
                     const std::function<ldbl()>& loss) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const ldbl keep = x.data[i];
        x.data[i] = keep + static_cast<ldbl>(kStep);
        const ldbl lp = loss();
        x.data[i] = keep - static_cast<ldbl>(kStep);
        const ldbl lm = loss();
        x.data[i] = keep;
        const double fd = static_cast<double>((lp - lm) / (2.0L * static_cast<ldbl>(kStep)));
        const double a = analytic.data[i];
        const double denom = std::max(1e-8, std::abs(fd) + std::abs(a));
        worst = std::max(worst, std::abs(fd - a) / denom);
    }
    return worst;
}

std::vector<GradCheckResult> check_model(const char* name, Mode mode, double p_drop) {
    TinyModel m = tiny_model(42);
    LstmParamsT<double> grads = shaped_params<double>(m.params.dims());
    {
        Rng drop(7);
        loss_and_grads(m.params, m.batch, m.state, mode, p_drop, drop, grads);
    }
    LstmParamsT<ldbl> pl = cast_params<ldbl>(m.params);
    const HiddenT<ldbl> sl{cast_mat<ldbl>(m.state.h), cast_mat<ldbl>(m.state.c)};
    auto loss = [&]() -> ldbl {
        Rng drop(7);
        LstmParamsT<ldbl> scratch = shaped_params<ldbl>(pl.dims());
        return loss_and_grads(pl, m.batch, sl, mode, p_drop, drop, scratch).loss;
    };
    std::vector<GradCheckResult> out;
    Mat<ldbl>* ld_mats[] = {&pl.emb, &pl.w_ih, &pl.w_hh, &pl.b_ih, &pl.b_hh, &pl.w_out, &pl.b_out};
    auto slots = m.params.slots(grads);
    for (size_t i = 0; i < slots.size(); ++i) {
        const double err = fd_against_ld(*ld_mats[i], *slots[i].grad, loss);
        out.push_back(make_result(std::string(name) + "/" + slots[i].name, err));
    }
    return out;
}

Vocabulary six_word_vocab() {
    // counts: a=3, b=2, c=1 (L1); d=2, e=1 (L2)
    return build_vocab({"a", "a", "a", "b", "b", "c"}, {"d", "d", "e"});
}

GradCheckResult check_mse_regularizer() {
    const Vocabulary vocab = six_word_vocab();
    const RowPartition part = partition_output_rows(vocab, MseAlignment::FrequencyRank);
    Rng rng(18);
    Mat<double> w_out = random_mat(rng, vocab.size(), 3);
    const auto reg = mse_regularizer(w_out, part);
    Mat<double> analytic(w_out.rows, w_out.cols);
    apply_mse_gradient(reg, part, 1.0, analytic);
    auto loss = [&] { return mse_regularizer(w_out, part).loss; };
    // FD over the whole matrix also confirms unselected rows get zero gradient
    return make_result("partition+mse_regularizer", fd_against(w_out, analytic, loss));
}

std::vector<GradCheckResult> check_joint() {
    // vocabulary matching the tiny model's V=5: m,n tagged L1, o tagged L2
    const Vocabulary vocab = build_vocab({"m", "m", "n"}, {"o"});
    const RowPartition part = partition_output_rows(vocab, MseAlignment::FrequencyRank);
    const double lambda = 0.7;
    TinyModel m = tiny_model(43);
    LstmParamsT<double> grads = shaped_params<double>(m.params.dims());
    {
        Rng drop(7);
        loss_and_grads(m.params, m.batch, m.state, Mode::Eval, 0.0, drop, grads);
        const auto reg = mse_regularizer(m.params.w_out, part);
        apply_mse_gradient(reg, part, lambda, grads.w_out);
    }
    LstmParamsT<ldbl> pl = cast_params<ldbl>(m.params);
    const HiddenT<ldbl> sl{cast_mat<ldbl>(m.state.h), cast_mat<ldbl>(m.state.c)};
    auto loss = [&]() -> ldbl {
        Rng drop(7);
        LstmParamsT<ldbl> scratch = shaped_params<ldbl>(pl.dims());
        const ldbl ce = loss_and_grads(pl, m.batch, sl, Mode::Eval, 0.0, drop, scratch).loss;
        return ce + static_cast<ldbl>(lambda) * mse_regularizer(pl.w_out, part).loss;
    };
    std::vector<GradCheckResult> out;
    Mat<ldbl>* ld_mats[] = {&pl.emb, &pl.w_ih, &pl.w_hh, &pl.b_ih, &pl.b_hh, &pl.w_out, &pl.b_out};
    auto slots = m.params.slots(grads);
    for (size_t i = 0; i < slots.size(); ++i) {
        const double err = fd_against_ld(*ld_mats[i], *slots[i].grad, loss);
        out.push_back(make_result(std::string("joint_loss/") + slots[i].name, err));
    }
    return out;
}

} // namespace

std::vector<GradCheckResult> run_gradcheck(bool corrupt_fixture) {
    std::vector<GradCheckResult> results;
    results.push_back(check_matmul(false));
    results.push_back(check_sigmoid());
    results.push_back(check_tanh());
    results.push_back(check_softmax_xent());
    results.push_back(check_embedding());
    results.push_back(check_dropout());
    results.push_back(check_mse());
    for (auto& r : check_model("model_eval", Mode::Eval, 0.0)) results.push_back(r);
    for (auto& r : check_model("model_dropout", Mode::Train, 0.25)) results.push_back(r);
    results.push_back(check_mse_regularizer());
    for (auto& r : check_joint()) results.push_back(r);
    if (corrupt_fixture) results.push_back(check_matmul(true));
    return results;
}

bool gradcheck_passed(const std::vector<GradCheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

} // namespace cslm
