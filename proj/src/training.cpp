#include "cslm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "cslm/eval.hpp"

namespace cslm {

const char* regime_cli_name(RegimeKind r) {
    switch (r) {
        case RegimeKind::L1Only: return "l1-only";
        case RegimeKind::L2Only: return "l2-only";
        case RegimeKind::Alternate: return "alternate";
        case RegimeKind::AlternateMse: return "alternate-mse";
    }
    return "?";
}

const char* regime_table_label(RegimeKind r) {
    switch (r) {
        case RegimeKind::L1Only: return "Spanish data only";
        case RegimeKind::L2Only: return "English data only";
        case RegimeKind::Alternate: return "Spanish + English data (*)";
        case RegimeKind::AlternateMse: return "MSE (+)";
    }
    return "?";
}

RegimeKind regime_from_cli_name(const std::string& s) {
    for (RegimeKind r : kAllRegimes)
        if (s == regime_cli_name(r)) return r;
    throw std::runtime_error("unknown regime '" + s +
                             "' (expected l1-only, l2-only, alternate or alternate-mse)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw std::runtime_error("config: epochs must be >= 0");
    if (batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
    if (bptt_steps < 1) throw std::runtime_error("config: bptt_steps must be >= 1");
    if (emb_dim < 1 || hidden_dim < 1)
        throw std::runtime_error("config: dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::runtime_error("config: dropout must be in [0,1)");
    if (initial_lr <= 0.0) throw std::runtime_error("config: initial_lr must be positive");
    if (clip_norm <= 0.0) throw std::runtime_error("config: clip_norm must be positive");
    if (lambda_mse < 0.0) throw std::runtime_error("config: lambda_mse must be >= 0");
}

std::string TrainConfig::serialize() const {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string s;
    s += "regime=" + std::string(regime_cli_name(regime)) + "\n";
    s += "epochs=" + std::to_string(epochs) + "\n";
    s += "batch_size=" + std::to_string(batch_size) + "\n";
    s += "bptt_steps=" + std::to_string(bptt_steps) + "\n";
    s += "emb_dim=" + std::to_string(emb_dim) + "\n";
    s += "hidden_dim=" + std::to_string(hidden_dim) + "\n";
    s += "dropout=" + fmt(dropout) + "\n";
    s += "initial_lr=" + fmt(initial_lr) + "\n";
    s += "lr_halving=" + std::string(lr_halving ? "true" : "false") + "\n";
    s += "clip_norm=" + fmt(clip_norm) + "\n";
    s += "lambda_mse=" + fmt(lambda_mse) + "\n";
    s += "mse_row_alignment=" +
         std::string(mse_row_alignment == MseAlignment::FrequencyRank ? "frequency_rank" : "none") +
         "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    return s;
}

uint64_t TrainConfig::fingerprint() const {
    const std::string s = serialize();
    return fnv1a64(s.data(), s.size());
}

double lr_schedule(double initial_lr, int epoch_index, bool halving) {
    if (epoch_index < 0) throw std::runtime_error("lr_schedule: epoch_index must be >= 0");
    if (!halving) return initial_lr;
    return initial_lr / std::exp2(static_cast<double>(epoch_index));
}

RowPartition partition_output_rows(const Vocabulary& vocab, MseAlignment alignment) {
    std::vector<int32_t> pool1 = vocab.ids_with_tag(VocabTag::L1);
    std::vector<int32_t> pool2 = vocab.ids_with_tag(VocabTag::L2);
    if (pool1.empty() || pool2.empty())
        throw std::runtime_error("partition_output_rows: a language has no exclusive words; "
                                 "the MSE regime is impossible on this vocabulary");
    if (alignment == MseAlignment::FrequencyRank) {
        auto by_count = [&vocab](int32_t a, int32_t b) {
            if (vocab.count(a) != vocab.count(b)) return vocab.count(a) > vocab.count(b);
            return a < b;
        };
        std::sort(pool1.begin(), pool1.end(), by_count);
        std::sort(pool2.begin(), pool2.end(), by_count);
    }
    const size_t pairs = std::min(pool1.size(), pool2.size());
    pool1.resize(pairs);
    pool2.resize(pairs);
    return {std::move(pool1), std::move(pool2)};
}

double joint_loss(double ce_loss, double mse_loss, double lambda_mse) {
    if (!std::isfinite(ce_loss) || !std::isfinite(mse_loss))
        throw std::runtime_error("joint_loss: non-finite loss term");
    return ce_loss + lambda_mse * mse_loss;
}

EpochStats run_epoch(LstmParams& params, LstmParams& grads, const std::vector<Batch>& schedule,
                     const TrainConfig& config, double lr, Rng& rng, Hidden& state,
                     const RowPartition* partition) {
    if (schedule.empty()) throw std::runtime_error("run_epoch: empty batch schedule");
    const bool use_mse = config.regime == RegimeKind::AlternateMse && config.lambda_mse > 0.0;
    if (use_mse && partition == nullptr)
        throw std::runtime_error("run_epoch: MSE regime needs a row partition");

    // shape the gradient buffers up front so the slot pointers stay valid
    if (!grads.emb.same_shape(params.emb) || !grads.w_hh.same_shape(params.w_hh))
        grads = shaped_params<real>(params.dims());

    double ce_sum = 0.0;
    int64_t positions = 0;
    double mse_sum = 0.0;
    auto slots = params.slots(grads);
    for (size_t bi = 0; bi < schedule.size(); ++bi) {
        const Batch& batch = schedule[bi];
        auto res = loss_and_grads(params, batch, state, Mode::Train, config.dropout, rng, grads);
        double mse_val = 0.0;
        if (use_mse) {
            auto reg = mse_regularizer(params.w_out, *partition);
            mse_val = reg.loss;
            apply_mse_gradient(reg, *partition, config.lambda_mse, grads.w_out);
        }
        const double total = joint_loss(res.loss, mse_val, config.lambda_mse);
        if (!std::isfinite(total))
            throw std::runtime_error("run_epoch: non-finite loss at batch " + std::to_string(bi) +
                                     " (lr=" + std::to_string(lr) + "); training diverged");
        clip_and_step(slots, lr, config.clip_norm);
        state = detach(res.state);
        const int64_t n = static_cast<int64_t>(batch.steps) * batch.batch_size;
        ce_sum += res.loss * static_cast<double>(n);
        positions += n;
        mse_sum += mse_val;
    }
    return {ce_sum / static_cast<double>(positions),
            mse_sum / static_cast<double>(schedule.size())};
}

std::vector<Batch> build_schedule(const TrainConfig& config, const TokenStream& l1_corpus,
                                  const TokenStream& l2_corpus) {
    switch (config.regime) {
        case RegimeKind::L1Only:
            return chunk_bptt(batchify(l1_corpus, config.batch_size), config.bptt_steps);
        case RegimeKind::L2Only:
            return chunk_bptt(batchify(l2_corpus, config.batch_size), config.bptt_steps);
        case RegimeKind::Alternate:
        case RegimeKind::AlternateMse: {
            auto l1 = chunk_bptt(batchify(l1_corpus, config.batch_size), config.bptt_steps);
            auto l2 = chunk_bptt(batchify(l2_corpus, config.batch_size), config.bptt_steps);
            return interleave_schedule(l1, l2);
        }
    }
    throw std::runtime_error("build_schedule: unknown regime");
}

TrainResult train(const TrainConfig& config, const TokenStream& l1_corpus,
                  const TokenStream& l2_corpus, const TokenStream& validation_corpus,
                  const Vocabulary& vocab, const EpochCallback& on_epoch) {
    config.validate();
    const ModelDims dims{vocab.size(), config.emb_dim, config.hidden_dim};
    TrainResult out;
    out.params = init_params<real>(dims, config.seed);
    if (config.epochs == 0) return out;

    const std::vector<Batch> schedule = build_schedule(config, l1_corpus, l2_corpus);
    RowPartition partition;
    const bool use_mse = config.regime == RegimeKind::AlternateMse && config.lambda_mse > 0.0;
    if (use_mse) partition = partition_output_rows(vocab, config.mse_row_alignment);

    LstmParams grads = shaped_params<real>(dims);
    Rng rng = Rng(config.seed).split(0x7261696E); // dropout stream
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_schedule(config.initial_lr, epoch, config.lr_halving);
        Hidden state = zero_state<real>(config.batch_size, dims);
        const EpochStats stats =
            run_epoch(out.params, grads, schedule, config, lr, rng, state,
                      use_mse ? &partition : nullptr);
        EpochReport rep;
        rep.epoch = epoch;
        rep.lr = lr;
        rep.train_ce = stats.mean_ce;
        rep.train_mse = stats.mean_mse;
        rep.val_ppl = std::numeric_limits<double>::quiet_NaN();
        if (validation_corpus.length() >= 2) {
            const int vb = static_cast<int>(
                std::min<int64_t>(10, validation_corpus.length() / 2));
            rep.val_ppl =
                perplexity(out.params, validation_corpus, vb, config.bptt_steps).perplexity;
        }
        rep.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.reports.push_back(rep);
        if (on_epoch) on_epoch(rep);
    }
    return out;
}

} // namespace cslm
