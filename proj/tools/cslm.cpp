// cslm: synthetic-corpus generation, the four training regimes, perplexity
// evaluation, the Table-style benchmark, and the gradient-check suite.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cslm/checkpoint.hpp"
#include "cslm/config.hpp"
#include "cslm/corpus.hpp"
#include "cslm/eval.hpp"
#include "cslm/gradcheck.hpp"
#include "cslm/model.hpp"
#include "cslm/synth.hpp"
#include "cslm/training.hpp"
#include "cslm/vocab.hpp"

namespace fs = std::filesystem;
using namespace cslm;

namespace {

// held-out tail of each training corpus used for per-epoch validation
constexpr double kValFraction = 0.05;

void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << content;
        if (!f) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

struct TrainFlagOpts {
    CLI::Option* regime = nullptr;
    CLI::Option* epochs = nullptr;
    CLI::Option* batch_size = nullptr;
    CLI::Option* bptt = nullptr;
    CLI::Option* emb_dim = nullptr;
    CLI::Option* hidden_dim = nullptr;
    CLI::Option* dropout = nullptr;
    CLI::Option* lr = nullptr;
    CLI::Option* no_halving = nullptr;
    CLI::Option* clip = nullptr;
    CLI::Option* lambda_mse = nullptr;
    CLI::Option* mse_align = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* config = nullptr;

    std::string regime_v = "alternate";
    int epochs_v = 20;
    int batch_size_v = 40;
    int bptt_v = 35;
    int emb_dim_v = 300;
    int hidden_dim_v = 650;
    double dropout_v = 0.3;
    double lr_v = 20.0;
    double clip_v = 0.25;
    double lambda_v = 3.0;
    std::string align_v = "frequency_rank";
    uint64_t seed_v = 1;
    std::string config_v;
};

void add_train_flags(CLI::App* cmd, TrainFlagOpts& o) {
    o.config = cmd->add_option("--config", o.config_v, "key=value config file");
    o.regime = cmd->add_option("--regime", o.regime_v,
                               "l1-only | l2-only | alternate | alternate-mse");
    o.epochs = cmd->add_option("--epochs", o.epochs_v, "training epochs");
    o.batch_size = cmd->add_option("--batch-size", o.batch_size_v, "minibatch rows");
    o.bptt = cmd->add_option("--bptt", o.bptt_v, "truncated-BPTT steps");
    o.emb_dim = cmd->add_option("--emb-dim", o.emb_dim_v, "embedding dimension");
    o.hidden_dim = cmd->add_option("--hidden-dim", o.hidden_dim_v, "LSTM dimension");
    o.dropout = cmd->add_option("--dropout", o.dropout_v, "dropout probability");
    o.lr = cmd->add_option("--lr", o.lr_v, "initial learning rate");
    o.no_halving = cmd->add_flag("--no-lr-halving", "keep the learning rate constant");
    o.clip = cmd->add_option("--clip", o.clip_v, "gradient clipping norm");
    o.lambda_mse = cmd->add_option("--lambda-mse", o.lambda_v, "weight of the MSE term");
    o.mse_align = cmd->add_option("--mse-align", o.align_v, "frequency_rank | none");
    o.seed = cmd->add_option("--seed", o.seed_v, "random seed");
}

// precedence: command-line flag > config file > built-in default
TrainConfig resolve_config(const TrainFlagOpts& o) {
    TrainConfig cfg;
    if (o.config->count() > 0) apply_config_file(cfg, o.config_v);
    if (o.regime->count() > 0) cfg.regime = regime_from_cli_name(o.regime_v);
    if (o.epochs->count() > 0) cfg.epochs = o.epochs_v;
    if (o.batch_size->count() > 0) cfg.batch_size = o.batch_size_v;
    if (o.bptt->count() > 0) cfg.bptt_steps = o.bptt_v;
    if (o.emb_dim->count() > 0) cfg.emb_dim = o.emb_dim_v;
    if (o.hidden_dim->count() > 0) cfg.hidden_dim = o.hidden_dim_v;
    if (o.dropout->count() > 0) cfg.dropout = o.dropout_v;
    if (o.lr->count() > 0) cfg.initial_lr = o.lr_v;
    if (o.no_halving->count() > 0) cfg.lr_halving = false;
    if (o.clip->count() > 0) cfg.clip_norm = o.clip_v;
    if (o.lambda_mse->count() > 0) cfg.lambda_mse = o.lambda_v;
    if (o.mse_align->count() > 0) {
        if (o.align_v == "frequency_rank") cfg.mse_row_alignment = MseAlignment::FrequencyRank;
        else if (o.align_v == "none") cfg.mse_row_alignment = MseAlignment::None;
        else throw std::runtime_error("--mse-align must be frequency_rank or none");
    }
    if (o.seed->count() > 0) cfg.seed = o.seed_v;
    cfg.validate();
    return cfg;
}

struct PreparedCorpora {
    Vocabulary vocab;
    TokenStream l1_train;
    TokenStream l2_train;
    TokenStream validation; // held-out tails of both corpora
};

TokenStream split_tail(TokenStream& s, double fraction) {
    const auto n = static_cast<int64_t>(static_cast<double>(s.length()) * fraction);
    TokenStream tail;
    tail.label = s.label;
    if (n < 2) return tail;
    tail.ids.assign(s.ids.end() - n, s.ids.end());
    s.ids.resize(s.ids.size() - static_cast<size_t>(n));
    return tail;
}

PreparedCorpora prepare_corpora(const std::string& l1_path, const std::string& l2_path) {
    const auto l1_words = tokenize_file(l1_path);
    const auto l2_words = tokenize_file(l2_path);
    PreparedCorpora p;
    p.vocab = build_vocab(l1_words, l2_words);
    p.l1_train = to_stream(p.vocab, l1_words, LangLabel::L1);
    p.l2_train = to_stream(p.vocab, l2_words, LangLabel::L2);
    TokenStream v1 = split_tail(p.l1_train, kValFraction);
    TokenStream v2 = split_tail(p.l2_train, kValFraction);
    p.validation.label = LangLabel::CS;
    p.validation.ids = v1.ids;
    p.validation.ids.insert(p.validation.ids.end(), v2.ids.begin(), v2.ids.end());
    return p;
}

void print_epoch(const EpochReport& r) {
    std::printf("epoch %2d  lr %-10.6g  train_ce %.4f  train_mse %.6f  val_ppl %-10.4g  (%.1fs)\n",
                r.epoch, r.lr, r.train_ce, r.train_mse, r.val_ppl, r.wall_seconds);
    std::fflush(stdout);
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                                     ec.message());
    const LatentGrammar g = generate_grammar(spec);
    const SynthText l1 = generate_monolingual(g, LangLabel::L1, spec.tokens_per_language,
                                              spec.seed + 1);
    const SynthText l2 = generate_monolingual(g, LangLabel::L2, spec.tokens_per_language,
                                              spec.seed + 2);
    const SynthText cs = generate_cs_test(g, spec.cs_tokens, spec.switch_prob, spec.seed + 3);
    write_corpus(l1, out_dir + "/l1.txt");
    write_corpus(l2, out_dir + "/l2.txt");
    write_corpus(cs, out_dir + "/cs_test.txt");
    write_file(out_dir + "/manifest.txt", manifest_text(spec, g));
    std::printf("wrote %s/{l1.txt,l2.txt,cs_test.txt,manifest.txt}\n", out_dir.c_str());
    std::printf("tokens: l1 %lld, l2 %lld, cs %lld\n",
                static_cast<long long>(l1.token_count), static_cast<long long>(l2.token_count),
                static_cast<long long>(cs.token_count));
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& l1_path, const std::string& l2_path,
              const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                                     ec.message());
    PreparedCorpora p = prepare_corpora(l1_path, l2_path);
    std::printf("vocabulary: %d words (hash %016llx)\n", p.vocab.size(),
                static_cast<unsigned long long>(p.vocab.content_hash()));

    TokenStream l1 = p.l1_train;
    TokenStream l2 = p.l2_train;
    if (cfg.regime == RegimeKind::Alternate || cfg.regime == RegimeKind::AlternateMse) {
        auto eq = equalize(l1, l2);
        l1 = std::move(eq.first);
        l2 = std::move(eq.second);
    }
    TrainResult result = train(cfg, l1, l2, p.validation, p.vocab, print_epoch);

    CheckpointMeta meta;
    meta.dims = {p.vocab.size(), cfg.emb_dim, cfg.hidden_dim};
    meta.vocab_hash = p.vocab.content_hash();
    meta.seed = cfg.seed;
    meta.regime = regime_cli_name(cfg.regime);
    meta.epoch = cfg.epochs;
    save_checkpoint(out_dir + "/model.cslm", result.params, meta);
    p.vocab.save_tsv(out_dir + "/vocab.tsv");
    write_file(out_dir + "/epochs.csv", epochs_csv(result.reports));
    std::printf("wrote %s/{model.cslm,vocab.tsv,epochs.csv}\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& test_path, int eval_batch, int bptt,
             const std::string& out_csv) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    const Vocabulary vocab = Vocabulary::load_tsv(vocab_path);
    if (vocab.content_hash() != ckpt.meta.vocab_hash)
        throw std::runtime_error(vocab_path + ": vocabulary hash does not match the checkpoint; "
                                 "this model was trained with a different vocabulary");
    if (vocab.size() != ckpt.meta.dims.vocab)
        throw std::runtime_error("vocabulary size disagrees with checkpoint dims");
    const TokenStream stream = to_stream(vocab, tokenize_file(test_path), LangLabel::CS);
    const PerplexityResult r = perplexity(ckpt.params, stream, eval_batch, bptt);
    std::printf("tokens scored   %lld\n", static_cast<long long>(r.tokens_scored));
    std::printf("tokens excluded %lld\n", static_cast<long long>(r.tokens_excluded));
    std::printf("oov fraction    %.6f\n", r.oov_fraction);
    std::printf("cross-entropy   %.6f nats/token\n", r.mean_ce_nats);
    std::printf("perplexity      %.4f\n", r.perplexity);
    if (!out_csv.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "tokens_scored,tokens_excluded,oov_fraction,mean_ce_nats,perplexity\n"
                      "%lld,%lld,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(r.tokens_scored),
                      static_cast<long long>(r.tokens_excluded), r.oov_fraction, r.mean_ce_nats,
                      r.perplexity);
        write_file(out_csv, buf);
    }
    return 0;
}

int cmd_bench(const TrainConfig& cfg, const std::string& l1_path, const std::string& l2_path,
              const std::string& test_path, const std::string& out_dir, int jobs) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                                     ec.message());
    PreparedCorpora p = prepare_corpora(l1_path, l2_path);
    const TokenStream cs = to_stream(p.vocab, tokenize_file(test_path), LangLabel::CS);
    std::printf("vocabulary: %d words; benchmarking 4 regimes (jobs=%d)\n", p.vocab.size(), jobs);
    const BenchReport report =
        run_bench(cfg, p.l1_train, p.l2_train, cs, p.validation, p.vocab, jobs);
    write_file(out_dir + "/bench.csv", bench_csv(report));
    write_file(out_dir + "/bench.txt", bench_table(report));
    write_file(out_dir + "/chart.csv", emit_chart_data(report));
    for (size_t i = 0; i < report.rows.size(); ++i)
        write_file(out_dir + "/epochs_" + regime_cli_name(report.rows[i].regime) + ".csv",
                   epochs_csv(report.traces[i]));
    std::printf("%s", bench_table(report).c_str());
    std::printf("wrote %s/{bench.csv,bench.txt,chart.csv,epochs_*.csv}\n", out_dir.c_str());
    return 0;
}

int cmd_gradcheck(bool corrupt_fixture) {
    const auto results = run_gradcheck(corrupt_fixture);
    size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    for (const auto& r : results)
        std::printf("%-*s  max rel err %.3e  (tol %.0e)  %s\n", static_cast<int>(width),
                    r.name.c_str(), r.max_rel_err, r.tolerance, r.pass ? "ok" : "FAIL");
    if (!gradcheck_passed(results)) {
        std::printf("gradcheck FAILED\n");
        return 1;
    }
    std::printf("gradcheck passed: %zu checks\n", results.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"code-switching language model trainer"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic bilingual dataset");
    SyntheticSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", spec.seed, "generator seed");
    synth->add_option("--states", spec.states, "latent bigram states");
    synth->add_option("--words-per-lang", spec.words_per_language, "vocabulary per language");
    synth->add_option("--tokens-per-lang", spec.tokens_per_language, "training tokens per language");
    synth->add_option("--cs-tokens", spec.cs_tokens, "code-switched test tokens");
    synth->add_option("--switch-p", spec.switch_prob, "per-token language switch probability");
    synth->add_option("--mean-len", spec.mean_sentence_len, "mean sentence length (words)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train one regime and save a checkpoint");
    TrainFlagOpts train_flags;
    std::string train_l1, train_l2, train_out = ".";
    train_cmd->add_option("--l1", train_l1, "L1 training corpus")->required();
    train_cmd->add_option("--l2", train_l2, "L2 training corpus")->required();
    train_cmd->add_option("--out", train_out, "output directory");
    add_train_flags(train_cmd, train_flags);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "perplexity of a test set under a checkpoint");
    std::string eval_ckpt, eval_vocab, eval_test, eval_out;
    int eval_batch = 10, eval_bptt = 35;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--vocab", eval_vocab, "vocabulary TSV")->required();
    eval_cmd->add_option("--test", eval_test, "test corpus")->required();
    eval_cmd->add_option("--eval-batch", eval_batch, "evaluation batch size");
    eval_cmd->add_option("--bptt", eval_bptt, "evaluation BPTT length");
    eval_cmd->add_option("--out", eval_out, "optional result CSV path");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "train all four regimes and compare");
    TrainFlagOpts bench_flags;
    std::string bench_l1, bench_l2, bench_test, bench_out;
    int bench_jobs = 2;
    bench_cmd->add_option("--l1", bench_l1, "L1 training corpus")->required();
    bench_cmd->add_option("--l2", bench_l2, "L2 training corpus")->required();
    bench_cmd->add_option("--test", bench_test, "code-switched test corpus")->required();
    bench_cmd->add_option("--out", bench_out, "output directory")->required();
    bench_cmd->add_option("--jobs", bench_jobs, "regimes trained in parallel");
    add_train_flags(bench_cmd, bench_flags);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    bool corrupt = false;
    grad_cmd->add_flag("--corrupt-fixture", corrupt,
                       "inject a corrupted backward (negative control)")
        ->group(""); // hidden

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(spec, synth_out);
        if (train_cmd->parsed())
            return cmd_train(resolve_config(train_flags), train_l1, train_l2, train_out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_vocab, eval_test, eval_batch, eval_bptt, eval_out);
        if (bench_cmd->parsed())
            return cmd_bench(resolve_config(bench_flags), bench_l1, bench_l2, bench_test,
                             bench_out, bench_jobs);
        if (grad_cmd->parsed()) return cmd_gradcheck(corrupt);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
