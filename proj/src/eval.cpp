#include "cslm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace cslm {

PerplexityResult perplexity(const LstmParams& params, const TokenStream& test_stream,
                            int eval_batch_size, int bptt_steps) {
    if (test_stream.ids.empty()) throw std::runtime_error("perplexity: empty test stream");
    const ModelDims dims = params.dims();
    const StreamMatrix m = batchify(test_stream, eval_batch_size);
    const std::vector<Batch> chunks = chunk_bptt(m, bptt_steps);

    Hidden state = zero_state<real>(eval_batch_size, dims);
    Rng rng(0); // unused in eval mode
    double ce_sum = 0.0;
    int64_t scored = 0;
    for (const Batch& chunk : chunks) {
        auto fwd = forward(params, chunk, state, Mode::Eval, 0.0, rng);
        std::vector<int32_t> targets(chunk.target.begin(), chunk.target.end());
        ce_sum += cross_entropy_sum(fwd.logits, targets);
        scored += static_cast<int64_t>(chunk.steps) * chunk.batch_size;
        state = detach(fwd.state);
    }
    PerplexityResult out;
    out.tokens_scored = scored;
    out.tokens_excluded = test_stream.length() - scored;
    out.mean_ce_nats = ce_sum / static_cast<double>(scored);
    out.perplexity = std::exp(out.mean_ce_nats);
    out.oov_fraction = static_cast<double>(test_stream.oov_count) /
                       static_cast<double>(test_stream.length());
    return out;
}

BenchReport run_bench(const TrainConfig& base_config, const TokenStream& l1_corpus,
                      const TokenStream& l2_corpus, const TokenStream& cs_test,
                      const TokenStream& validation, const Vocabulary& vocab, int jobs) {
    base_config.validate();
    auto [l1_eq, l2_eq] = equalize(l1_corpus, l2_corpus);

    BenchReport report;
    const int n = static_cast<int>(std::size(kAllRegimes));
    report.rows.resize(n);
    report.traces.resize(n);

    auto run_one = [&](int i) {
        TrainConfig cfg = base_config;
        cfg.regime = kAllRegimes[i];
        const bool alternate = cfg.regime == RegimeKind::Alternate ||
                               cfg.regime == RegimeKind::AlternateMse;
        const TokenStream& l1 = alternate ? l1_eq : l1_corpus;
        const TokenStream& l2 = alternate ? l2_eq : l2_corpus;
        TrainResult tr = train(cfg, l1, l2, validation, vocab);
        const PerplexityResult ppl = perplexity(tr.params, cs_test, 10, cfg.bptt_steps);
        BenchRow row;
        row.regime = cfg.regime;
        row.label = regime_table_label(cfg.regime);
        row.perplexity = ppl.perplexity;
        row.config_fingerprint = cfg.fingerprint();
        row.seed = cfg.seed;
        report.rows[i] = row;
        report.traces[i] = std::move(tr.reports);
    };

    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) run_one(i);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::string> errors(n);
        for (int i = 0; i < n; ++i)
            workers.emplace_back([&, i] {
                try {
                    run_one(i);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            });
        for (auto& w : workers) w.join();
        for (int i = 0; i < n; ++i)
            if (!errors[i].empty())
                throw std::runtime_error(std::string("bench: ") + regime_cli_name(kAllRegimes[i]) +
                                         " failed: " + errors[i]);
    }
    report.complete = true;
    for (const auto& row : report.rows)
        if (row.label.empty()) report.complete = false;
    return report;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_hex(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::string emit_chart_data(const BenchReport& report) {
    if (!report.complete)
        throw std::runtime_error("emit_chart_data: benchmark report is incomplete");
    std::string out = "regime,perplexity\n";
    for (const auto& row : report.rows)
        out += "\"" + row.label + "\"," + fmt_double(row.perplexity) + "\n";
    return out;
}

std::string bench_csv(const BenchReport& report) {
    std::string out = "regime,label,perplexity,config_fingerprint,seed\n";
    for (const auto& row : report.rows) {
        out += std::string(regime_cli_name(row.regime)) + ",\"" + row.label + "\"," +
               fmt_double(row.perplexity) + "," + fmt_hex(row.config_fingerprint) + "," +
               std::to_string(row.seed) + "\n";
    }
    return out;
}

std::string bench_table(const BenchReport& report) {
    size_t width = std::string("Training data").size();
    for (const auto& row : report.rows) width = std::max(width, row.label.size());
    std::string out = "Training data";
    out.append(width - 13 + 2, ' ');
    out += "Perplexity\n";
    for (const auto& row : report.rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", row.perplexity);
        out += row.label;
        out.append(width - row.label.size() + 2, ' ');
        out += buf;
        out += '\n';
    }
    return out;
}

std::string epochs_csv(const std::vector<EpochReport>& reports) {
    std::string out = "epoch,lr,train_ce,train_mse,val_ppl\n";
    for (const auto& r : reports) {
        out += std::to_string(r.epoch) + "," + fmt_double(r.lr) + "," + fmt_double(r.train_ce) +
               "," + fmt_double(r.train_mse) + "," + fmt_double(r.val_ppl) + "\n";
    }
    return out;
}

} // namespace cslm
