#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cslm/eval.hpp"
#include "cslm/synth.hpp"
#include "cslm/training.hpp"

using namespace cslm;

namespace {

Vocabulary words_vocab(int n_words) {
    std::vector<std::string> l1, l2{"zz"};
    for (int i = 0; i < n_words; ++i) l1.push_back("w" + std::to_string(i));
    return build_vocab(l1, l2);
}

TokenStream random_stream(int len, int vocab, uint64_t seed) {
    Rng rng(seed);
    TokenStream s;
    for (int i = 0; i < len; ++i) s.ids.push_back(static_cast<int32_t>(rng.next_below(vocab)));
    return s;
}

} // namespace

TEST_CASE("a zero-parameter model scores perplexity V exactly") {
    const ModelDims dims{4, 3, 5};
    const LstmParams zero = shaped_params<real>(dims);
    const PerplexityResult r = perplexity(zero, random_stream(200, 4, 1), 10, 7);
    CHECK(r.perplexity == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(r.tokens_scored == 190); // 10 rows x (20-1) columns
    CHECK(r.tokens_excluded == 10);
    CHECK(r.oov_fraction == 0.0);
}

TEST_CASE("perplexity equals exp of the stored cross-entropy") {
    const ModelDims dims{9, 4, 6};
    const auto p = init_params<real>(dims, 5);
    const PerplexityResult r = perplexity(p, random_stream(300, 9, 2), 10, 11);
    CHECK(r.perplexity == doctest::Approx(std::exp(r.mean_ce_nats)).epsilon(1e-9));
    CHECK(r.perplexity >= 1.0);
}

TEST_CASE("evaluation is read-only and repeatable") {
    const ModelDims dims{9, 4, 6};
    const auto p = init_params<real>(dims, 5);
    const auto before = p.w_out.data;
    const TokenStream s = random_stream(240, 9, 3);
    const PerplexityResult a = perplexity(p, s, 10, 9);
    const PerplexityResult b = perplexity(p, s, 10, 9);
    CHECK(a.perplexity == b.perplexity);
    CHECK(a.mean_ce_nats == b.mean_ce_nats);
    CHECK(p.w_out.data == before);
}

TEST_CASE("OOV accounting flows from the vocabulary mapping") {
    const Vocabulary v = build_vocab({"a"}, {"b"});
    const TokenStream s = to_stream(v, {"a", "zzz", "qqq", "b", "<eos>"}, LangLabel::CS);
    CHECK(s.oov_count == 2);
    const ModelDims dims{v.size(), 3, 4};
    const PerplexityResult r = perplexity(shaped_params<real>(dims), s, 1, 2);
    CHECK(r.oov_fraction == doctest::Approx(0.4));
}

TEST_CASE("perplexity input guards") {
    const ModelDims dims{4, 3, 4};
    const LstmParams p = shaped_params<real>(dims);
    TokenStream empty;
    CHECK_THROWS_WITH_AS(perplexity(p, empty, 10, 5), doctest::Contains("empty"),
                         std::runtime_error);
    CHECK_THROWS(perplexity(p, random_stream(5, 4, 1), 10, 5)); // too short to batch
}

TEST_CASE("a memorizable pattern trains to near-1 perplexity") {
    // 20 copies of the same 10-word sentence; every next word is determined
    std::string text;
    for (int rep = 0; rep < 20; ++rep) {
        for (int w = 0; w < 9; ++w) text += "p" + std::to_string(w) + (w == 8 ? "" : " ");
        text += '\n';
    }
    const auto words = tokenize_lines(text);
    const Vocabulary vocab = build_vocab(words, {"zz"});
    const TokenStream stream = to_stream(vocab, words, LangLabel::L1);

    TrainConfig cfg;
    cfg.regime = RegimeKind::L1Only;
    cfg.epochs = 50;
    cfg.batch_size = 4;
    cfg.bptt_steps = 10;
    cfg.emb_dim = 32;
    cfg.hidden_dim = 64;
    cfg.dropout = 0.0;
    cfg.initial_lr = 1.0;
    cfg.lr_halving = false;
    cfg.clip_norm = 1.0;
    cfg.seed = 2;
    const TrainResult r = train(cfg, stream, stream, TokenStream{}, vocab);
    const PerplexityResult ppl = perplexity(r.params, stream, 4, 10);
    CHECK(ppl.perplexity < 1.1);
}

TEST_CASE("run_bench produces the four labelled rows deterministically") {
    SyntheticSpec spec;
    spec.seed = 31;
    spec.states = 3;
    spec.words_per_language = 12;
    spec.tokens_per_language = 900;
    spec.cs_tokens = 400;
    const LatentGrammar g = generate_grammar(spec);
    auto text = [](const SynthText& t) {
        std::string s;
        for (const auto& line : t.sentences) {
            s += line;
            s += '\n';
        }
        return s;
    };
    const auto w1 = tokenize_lines(text(generate_monolingual(g, LangLabel::L1, 900, 1)));
    const auto w2 = tokenize_lines(text(generate_monolingual(g, LangLabel::L2, 900, 2)));
    const auto wc = tokenize_lines(text(generate_cs_test(g, 400, 0.3, 3)));
    const Vocabulary vocab = build_vocab(w1, w2);
    const TokenStream l1 = to_stream(vocab, w1, LangLabel::L1);
    const TokenStream l2 = to_stream(vocab, w2, LangLabel::L2);
    const TokenStream cs = to_stream(vocab, wc, LangLabel::CS);

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 5;
    cfg.bptt_steps = 10;
    cfg.emb_dim = 8;
    cfg.hidden_dim = 10;
    cfg.seed = 4;
    const BenchReport a = run_bench(cfg, l1, l2, cs, l1, vocab, 1);
    REQUIRE(a.rows.size() == 4);
    CHECK(a.complete);
    CHECK(a.rows[0].label == "Spanish data only");
    CHECK(a.rows[1].label == "English data only");
    CHECK(a.rows[2].label == "Spanish + English data (*)");
    CHECK(a.rows[3].label == "MSE (+)");
    CHECK(a.traces.size() == 4);
    CHECK(a.traces[0].size() == 1);

    // rerun (and a parallel run) give identical numbers
    const BenchReport b = run_bench(cfg, l1, l2, cs, l1, vocab, 2);
    for (int i = 0; i < 4; ++i) CHECK(a.rows[i].perplexity == b.rows[i].perplexity);
}

TEST_CASE("chart data round-trips exactly") {
    BenchReport r;
    r.complete = true;
    const char* labels[] = {"Spanish data only", "English data only",
                            "Spanish + English data (*)", "MSE (+)"};
    const double ppl[] = {299.63, 244.51, 83.10, 80.38};
    for (int i = 0; i < 4; ++i) {
        BenchRow row;
        row.regime = kAllRegimes[i];
        row.label = labels[i];
        row.perplexity = ppl[i];
        r.rows.push_back(row);
        r.traces.emplace_back();
    }
    const std::string csv = emit_chart_data(r);
    std::istringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "regime,perplexity");
    for (int i = 0; i < 4; ++i) {
        REQUIRE(std::getline(ss, line));
        const size_t comma = line.rfind(',');
        CHECK(line.substr(0, comma) == "\"" + std::string(labels[i]) + "\"");
        CHECK(std::stod(line.substr(comma + 1)) == ppl[i]); // exact round trip
    }
    CHECK_FALSE(std::getline(ss, line));

    BenchReport incomplete = r;
    incomplete.complete = false;
    CHECK_THROWS_WITH_AS(emit_chart_data(incomplete), doctest::Contains("incomplete"),
                         std::runtime_error);

    const std::string table = bench_table(r);
    CHECK(table.find("Training data") != std::string::npos);
    CHECK(table.find("MSE (+)") != std::string::npos);
    CHECK(table.find("299.63") != std::string::npos);
}

TEST_CASE("epoch CSV format excludes timing") {
    EpochReport e;
    e.epoch = 0;
    e.lr = 20.0;
    e.train_ce = 1.5;
    e.train_mse = 0.25;
    e.val_ppl = 7.0;
    e.wall_seconds = 123.0; // must not appear
    const std::string csv = epochs_csv({e});
    CHECK(csv.find("epoch,lr,train_ce,train_mse,val_ppl") == 0);
    CHECK(csv.find("123") == std::string::npos);
}
