#pragma once

// Perplexity evaluation and the four-regime benchmark.

#include <cstdint>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/model.hpp"
#include "cslm/training.hpp"

namespace cslm {

struct PerplexityResult {
    int64_t tokens_scored = 0;   // target positions actually evaluated
    int64_t tokens_excluded = 0; // stream tokens never scored (batchify remainder + row heads)
    double mean_ce_nats = 0.0;
    double perplexity = 0.0;     // exp(mean_ce_nats)
    double oov_fraction = 0.0;
};

// Mean cross-entropy of the test stream under the model, dropout off,
// initial state zero. Scores every target position the batch layout
// reaches and reports how many stream tokens fell outside it.
PerplexityResult perplexity(const LstmParams& params, const TokenStream& test_stream,
                            int eval_batch_size, int bptt_steps);

struct BenchRow {
    RegimeKind regime = RegimeKind::L1Only;
    std::string label;
    double perplexity = 0.0;
    uint64_t config_fingerprint = 0;
    uint64_t seed = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;                    // Table order: L1, L2, alternate, MSE
    std::vector<std::vector<EpochReport>> traces;  // per-regime epoch reports
    bool complete = false;
};

// Trains all four regimes with the same seed and geometry, evaluates each
// on the CS test stream. l1/l2 are the raw training streams; equalization
// for the alternate regimes happens here. jobs > 1 trains regimes in
// parallel (results are identical either way).
BenchReport run_bench(const TrainConfig& base_config, const TokenStream& l1_corpus,
                      const TokenStream& l2_corpus, const TokenStream& cs_test,
                      const TokenStream& validation, const Vocabulary& vocab, int jobs = 1);

// CSV rows "regime,perplexity" in Table order. Throws on incomplete reports.
std::string emit_chart_data(const BenchReport& report);

// bench.csv body: regime, label, perplexity, fingerprint, seed.
std::string bench_csv(const BenchReport& report);

// Aligned two-column text table of the four regimes.
std::string bench_table(const BenchReport& report);

// epoch,lr,train_ce,train_mse,val_ppl rows; no timing column so identical
// runs produce identical files.
std::string epochs_csv(const std::vector<EpochReport>& reports);

} // namespace cslm
