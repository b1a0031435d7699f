#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <unordered_map>

#include "cslm/synth.hpp"
#include "cslm/vocab.hpp"

using namespace cslm;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.seed = 21;
    s.states = 4;
    s.words_per_language = 20;
    s.tokens_per_language = 2000;
    s.cs_tokens = 1000;
    return s;
}

// hand-built grammar with one word per state so word entropy is zero
LatentGrammar delta_grammar(int states, double eos_prob, bool uniform) {
    LatentGrammar g;
    g.transition = Mat<double>(states, states);
    for (int i = 0; i < states; ++i) {
        if (uniform) {
            for (int j = 0; j < states; ++j) g.transition(i, j) = 1.0 / states;
        } else {
            g.transition(i, (i + 1) % states) = 1.0; // single cycle
        }
    }
    g.eos_prob = eos_prob;
    g.emit_l1.resize(states);
    g.emit_l2.resize(states);
    for (int i = 0; i < states; ++i) {
        g.emit_l1[i] = {"x" + std::to_string(i)};
        g.emit_l2[i] = {"y" + std::to_string(i)};
    }
    return g;
}

std::set<std::string> word_set(const std::vector<std::vector<std::string>>& buckets) {
    std::set<std::string> out;
    for (const auto& b : buckets) out.insert(b.begin(), b.end());
    return out;
}

std::vector<std::string> all_words(const SynthText& t) {
    std::vector<std::string> out;
    for (const auto& line : t.sentences) {
        size_t pos = 0;
        while (pos < line.size()) {
            size_t sp = line.find(' ', pos);
            if (sp == std::string::npos) sp = line.size();
            out.push_back(line.substr(pos, sp - pos));
            pos = sp + (sp < line.size() ? 1 : 0);
        }
    }
    return out;
}

} // namespace

TEST_CASE("generate_grammar is deterministic with valid rows") {
    const SyntheticSpec spec = small_spec();
    const LatentGrammar a = generate_grammar(spec);
    const LatentGrammar b = generate_grammar(spec);
    CHECK(a.transition.data == b.transition.data);
    CHECK(a.emit_l1 == b.emit_l1);
    for (int i = 0; i < a.states(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < a.states(); ++j) sum += a.transition(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    SyntheticSpec two = spec;
    two.states = 2;
    two.words_per_language = 2;
    const LatentGrammar g2 = generate_grammar(two);
    CHECK(g2.transition.rows == 2);
    CHECK(g2.transition.cols == 2);
    // emitted word sets disjoint across languages
    const auto w1 = word_set(a.emit_l1);
    const auto w2 = word_set(a.emit_l2);
    for (const auto& w : w1) CHECK(w2.count(w) == 0);
    // every configured word is assigned to exactly one bucket
    CHECK(static_cast<int>(w1.size()) == spec.words_per_language);
}

TEST_CASE("generate_monolingual stays in language and is deterministic") {
    const LatentGrammar g = generate_grammar(small_spec());
    const SynthText a = generate_monolingual(g, LangLabel::L1, 2000, 3);
    const SynthText b = generate_monolingual(g, LangLabel::L1, 2000, 3);
    CHECK(a.sentences == b.sentences);
    CHECK(a.token_count >= 2000);
    const auto range = word_set(g.emit_l1);
    for (const auto& w : all_words(a)) CHECK(range.count(w) == 1);
    CHECK_THROWS(generate_monolingual(g, LangLabel::L1, 50, 3)); // below minimum
}

TEST_CASE("empirical bigram counts match the transition matrix") {
    const LatentGrammar g = generate_grammar(small_spec());
    const SynthText t = generate_monolingual(g, LangLabel::L2, 50000, 11);
    // word -> state via bucket membership
    std::unordered_map<std::string, int> state_of;
    for (int s = 0; s < g.states(); ++s)
        for (const auto& w : g.emit_l2[s]) state_of[w] = s;
    Mat<double> counts(g.states(), g.states());
    for (const auto& line : t.sentences) {
        int prev = -1;
        size_t pos = 0;
        while (pos < line.size()) {
            size_t sp = line.find(' ', pos);
            if (sp == std::string::npos) sp = line.size();
            const int s = state_of.at(line.substr(pos, sp - pos));
            if (prev >= 0) counts(prev, s) += 1.0;
            prev = s;
            pos = sp + (sp < line.size() ? 1 : 0);
        }
    }
    // Pearson chi^2 against the true rows; ~1 per dof when the chain matches
    double chi2 = 0.0;
    int dof = 0;
    for (int i = 0; i < g.states(); ++i) {
        double row_total = 0.0;
        for (int j = 0; j < g.states(); ++j) row_total += counts(i, j);
        REQUIRE(row_total > 100);
        for (int j = 0; j < g.states(); ++j) {
            const double expect = row_total * g.transition(i, j);
            chi2 += (counts(i, j) - expect) * (counts(i, j) - expect) / expect;
            ++dof;
        }
        dof -= 1; // row sums are fixed
    }
    CHECK(chi2 / dof < 2.0);
}

TEST_CASE("generate_cs_test switching behaviour") {
    const LatentGrammar g = generate_grammar(small_spec());
    const auto l1_range = word_set(g.emit_l1);
    const auto l2_range = word_set(g.emit_l2);

    const SynthText pure = generate_cs_test(g, 1000, 0.0, 5);
    for (const auto& w : all_words(pure)) CHECK(l1_range.count(w) == 1);

    const SynthText alt = generate_cs_test(g, 1000, 1.0, 5);
    for (const auto& line : alt.sentences) {
        const auto words = all_words({{line}, 0, LangLabel::CS});
        for (size_t i = 0; i < words.size(); ++i) {
            const bool is_l1 = l1_range.count(words[i]) == 1;
            CHECK(is_l1 == (i % 2 == 0)); // strict alternation from the L1 start
        }
    }

    for (uint64_t seed : {7ull, 8ull, 9ull}) {
        const SynthText cs = generate_cs_test(g, 10000, 0.3, seed);
        int64_t l2_words = 0, words = 0;
        for (const auto& w : all_words(cs)) {
            ++words;
            if (l2_range.count(w)) ++l2_words;
        }
        const double frac = static_cast<double>(l2_words) / static_cast<double>(words);
        CHECK(frac > 0.2);
        CHECK(frac < 0.45);
    }
}

TEST_CASE("oracle: deterministic chain leaves only sentence-length entropy") {
    // One-hot rows and one word per state make every word certain. What
    // remains is the continue/end coin at each word position; word positions
    // are a 1/(1+q) fraction of tokens, so the rate is H_b(q)/(1+q).
    const double q = 0.2;
    const LatentGrammar g = delta_grammar(3, q, false);
    const double bits = oracle_cross_entropy(g, 0.0, OracleMode::MonoL1);
    const double binary_entropy = -q * std::log(q) - (1 - q) * std::log(1 - q);
    const double expect = binary_entropy / (1.0 + q) / kNatsPerBit;
    CHECK(bits == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("oracle: uniform transitions give log2(S) bits per token") {
    LatentGrammar g = delta_grammar(4, 0.0, true); // no sentence ends
    const double bits = oracle_cross_entropy(g, 0.0, OracleMode::MonoL1);
    CHECK(bits == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("oracle rejects non-ergodic transition matrices") {
    LatentGrammar g = delta_grammar(4, 0.1, false);
    // two disjoint 2-cycles
    g.transition.zero();
    g.transition(0, 1) = 1.0;
    g.transition(1, 0) = 1.0;
    g.transition(2, 3) = 1.0;
    g.transition(3, 2) = 1.0;
    CHECK_THROWS_WITH_AS(oracle_cross_entropy(g, 0.0, OracleMode::MonoL1),
                         doctest::Contains("ergodic"), std::runtime_error);
}

TEST_CASE("oracle agrees with a Monte-Carlo estimate over 1e6 tokens") {
    const LatentGrammar g = generate_grammar(small_spec());
    const double oracle_bits = oracle_cross_entropy(g, 0.3, OracleMode::CS);
    const SynthText big = generate_cs_test(g, 1000000, 0.3, 123);
    const double mc_bits = true_model_score(g, 0.3, OracleMode::CS, big) / kNatsPerBit;
    CHECK(std::abs(mc_bits - oracle_bits) < 0.02);
}

TEST_CASE("true-model perplexity converges to exp(oracle nats)") {
    const LatentGrammar g = generate_grammar(small_spec());
    for (auto [mode, p] : {std::pair{OracleMode::MonoL1, 0.0}, {OracleMode::CS, 0.3}}) {
        const double oracle_nats = oracle_cross_entropy(g, p, mode) * kNatsPerBit;
        const SynthText t = mode == OracleMode::CS
                                ? generate_cs_test(g, 50000, p, 77)
                                : generate_monolingual(g, LangLabel::L1, 50000, 77);
        const double mc_nats = true_model_score(g, p, mode, t);
        CHECK(std::exp(mc_nats) == doctest::Approx(std::exp(oracle_nats)).epsilon(0.05));
    }
}

TEST_CASE("manifest carries recomputable oracle entropies") {
    const SyntheticSpec spec = small_spec();
    const LatentGrammar g = generate_grammar(spec);
    const std::string m = manifest_text(spec, g);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", oracle_cross_entropy(g, spec.switch_prob,
                                                                  OracleMode::CS));
    CHECK(m.find("oracle_bits_per_token_cs=" + std::string(buf)) != std::string::npos);
    CHECK(m.find("seed=21") != std::string::npos);
}

TEST_CASE("spec validation") {
    SyntheticSpec s = small_spec();
    s.words_per_language = 2; // fewer words than states
    CHECK_THROWS(s.validate());
    s = small_spec();
    s.switch_prob = 1.5;
    CHECK_THROWS(s.validate());
}
