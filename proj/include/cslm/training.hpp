#pragma once

// The four training regimes: monolingual baselines, alternate-batch
// bilingual training with hidden-state carryover, and the joint
// cross-entropy + output-embedding-MSE objective.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/matrix.hpp"
#include "cslm/model.hpp"
#include "cslm/vocab.hpp"

namespace cslm {

enum class RegimeKind { L1Only, L2Only, Alternate, AlternateMse };

constexpr RegimeKind kAllRegimes[] = {RegimeKind::L1Only, RegimeKind::L2Only,
                                      RegimeKind::Alternate, RegimeKind::AlternateMse};

const char* regime_cli_name(RegimeKind r);    // l1-only, l2-only, alternate, alternate-mse
const char* regime_table_label(RegimeKind r); // report row labels
RegimeKind regime_from_cli_name(const std::string& s);

enum class MseAlignment { FrequencyRank, None };

struct TrainConfig {
    RegimeKind regime = RegimeKind::Alternate;
    int epochs = 20;
    int batch_size = 40;
    int bptt_steps = 35;
    int emb_dim = 300;
    int hidden_dim = 650;
    double dropout = 0.3;
    double initial_lr = 20.0;
    bool lr_halving = true;
    double clip_norm = 0.25;
    // weights the MSE term up to the cross-entropy scale; 0 disables it
    double lambda_mse = 3.0;
    MseAlignment mse_row_alignment = MseAlignment::FrequencyRank;
    uint64_t seed = 1;

    void validate() const;
    std::string serialize() const; // config-file format, every field
    uint64_t fingerprint() const;
};

struct EpochReport {
    int epoch = 0;
    double lr = 0.0;
    double train_ce = 0.0;   // mean cross-entropy, nats per position
    double train_mse = 0.0;  // mean raw MSE term (0 unless the regime uses it)
    double val_ppl = 0.0;    // NaN when no validation stream was given
    double wall_seconds = 0.0;
};

// lr = initial / 2^epoch when halving is enabled, else constant.
double lr_schedule(double initial_lr, int epoch_index, bool halving);

// Aligned output-embedding row pools: l1_rows[k] pairs with l2_rows[k].
// FrequencyRank orders each pool by descending corpus count (ties by id);
// None keeps ascending id order. Shared and special words never enter a
// pool, and both pools are truncated to the smaller size.
struct RowPartition {
    std::vector<int32_t> l1_rows;
    std::vector<int32_t> l2_rows;
    int pairs() const { return static_cast<int>(l1_rows.size()); }
};

RowPartition partition_output_rows(const Vocabulary& vocab, MseAlignment alignment);

template <typename T>
std::pair<Mat<T>, Mat<T>> gather_partition(const Mat<T>& w_out, const RowPartition& part) {
    Mat<T> w1(part.pairs(), w_out.cols);
    Mat<T> w2(part.pairs(), w_out.cols);
    for (int k = 0; k < part.pairs(); ++k) {
        const T* s1 = w_out.row(part.l1_rows[k]);
        const T* s2 = w_out.row(part.l2_rows[k]);
        std::copy(s1, s1 + w_out.cols, w1.row(k));
        std::copy(s2, s2 + w_out.cols, w2.row(k));
    }
    return {std::move(w1), std::move(w2)};
}

template <typename T>
struct MseRegResult {
    AccT<T> loss = 0;
    Mat<T> d_w1; // gradient on the l1_rows of w_out, row k per pair
    Mat<T> d_w2;
};

// MSE between the aligned row blocks of the output projection. Rows outside
// the partition get no gradient from this term.
template <typename T>
MseRegResult<T> mse_regularizer(const Mat<T>& w_out, const RowPartition& part) {
    if (part.pairs() == 0)
        throw std::runtime_error("mse_regularizer: empty row partition");
    auto [w1, w2] = gather_partition(w_out, part);
    auto r = mse(w1, w2);
    return {r.loss, std::move(r.da), std::move(r.db)};
}

// scatter lambda-weighted regularizer gradients back into the w_out gradient
template <typename T>
void apply_mse_gradient(const MseRegResult<T>& reg, const RowPartition& part, double lambda,
                        Mat<T>& d_w_out) {
    const T lam = static_cast<T>(lambda);
    for (int k = 0; k < part.pairs(); ++k) {
        T* g1 = d_w_out.row(part.l1_rows[k]);
        T* g2 = d_w_out.row(part.l2_rows[k]);
        const T* s1 = reg.d_w1.row(k);
        const T* s2 = reg.d_w2.row(k);
        for (int j = 0; j < d_w_out.cols; ++j) {
            g1[j] += lam * s1[j];
            g2[j] += lam * s2[j];
        }
    }
}

// total = ce + lambda * mse
double joint_loss(double ce_loss, double mse_loss, double lambda_mse);

struct EpochStats {
    double mean_ce = 0.0;
    double mean_mse = 0.0;
};

// One pass over the schedule: forward+backward per batch, the Eq.-style MSE
// term when the regime asks for it, one clipped SGD step per batch, hidden
// state detached and carried into the next batch whatever its language.
EpochStats run_epoch(LstmParams& params, LstmParams& grads, const std::vector<Batch>& schedule,
                     const TrainConfig& config, double lr, Rng& rng, Hidden& state,
                     const RowPartition* partition);

struct TrainResult {
    LstmParams params;
    std::vector<EpochReport> reports;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Full training run. For ALTERNATE* regimes the two corpora must already be
// equalized (unequal batch counts fail in interleave_schedule). Passing an
// empty validation stream skips per-epoch perplexity (recorded as NaN).
TrainResult train(const TrainConfig& config, const TokenStream& l1_corpus,
                  const TokenStream& l2_corpus, const TokenStream& validation_corpus,
                  const Vocabulary& vocab, const EpochCallback& on_epoch = {});

// The batch schedule train() iterates, exposed for tests.
std::vector<Batch> build_schedule(const TrainConfig& config, const TokenStream& l1_corpus,
                                  const TokenStream& l2_corpus);

} // namespace cslm
