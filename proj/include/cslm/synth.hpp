#pragma once

// Synthetic bilingual corpora with a shared latent bigram skeleton and
// language-specific emissions, plus an exact entropy oracle for the
// generating process. Gives desk-scale experiments a known ground truth.

#include <cstdint>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/matrix.hpp"

namespace cslm {

struct SyntheticSpec {
    uint64_t seed = 1;
    int states = 8;
    int words_per_language = 100;
    int64_t tokens_per_language = 50000;
    int64_t cs_tokens = 10000;
    double switch_prob = 0.3;      // per-token language flip in the CS test
    double mean_sentence_len = 10.0; // geometric length, words per sentence

    void validate() const;
};

// Latent bigram chain over `states` with per-language word buckets. Every
// sentence starts at start_state; ends with probability eos_prob after each
// word. State s emits a word from its bucket with Zipf weights 1/(1+rank);
// buckets are disjoint across states and across languages, so a word
// identifies its (language, state).
struct LatentGrammar {
    Mat<double> transition; // [S x S], rows sum to 1
    double eos_prob = 0.125;
    int start_state = 0;
    std::vector<std::vector<std::string>> emit_l1; // [state][rank]
    std::vector<std::vector<std::string>> emit_l2;

    int states() const { return transition.rows; }
    const std::vector<std::vector<std::string>>& emissions(LangLabel l) const {
        return l == LangLabel::L2 ? emit_l2 : emit_l1;
    }
};

// A generated corpus in text form, one sentence per element. token_count
// includes the implied <eos> after each sentence.
struct SynthText {
    std::vector<std::string> sentences;
    int64_t token_count = 0;
    LangLabel label = LangLabel::L1;
};

enum class OracleMode { MonoL1, MonoL2, CS };

LatentGrammar generate_grammar(const SyntheticSpec& spec);

// Whole sentences until token_target is reached (so the total is >= the
// target and ends at a sentence boundary).
SynthText generate_monolingual(const LatentGrammar& g, LangLabel lang, int64_t token_target,
                               uint64_t seed);

// Matrix language is L1: every sentence starts in L1 and the emitting
// language flips with probability switch_prob at each following word.
SynthText generate_cs_test(const LatentGrammar& g, int64_t token_target, double switch_prob,
                           uint64_t seed);

// Exact expected cross-entropy of the generating process in bits per token,
// by enumeration over (state, language) pairs and the stationary
// distribution of the extended chain. Throws if the transition matrix is
// not ergodic.
double oracle_cross_entropy(const LatentGrammar& g, double switch_prob, OracleMode mode);

// Mean -ln P(token) of a generated text under the true process, nats per
// token. Independent Monte-Carlo route for checking the enumerated oracle.
double true_model_score(const LatentGrammar& g, double switch_prob, OracleMode mode,
                        const SynthText& text);

void write_corpus(const SynthText& text, const std::string& path);

// key=value sidecar describing a generated dataset, oracle entropies included.
std::string manifest_text(const SyntheticSpec& spec, const LatentGrammar& g);

constexpr double kNatsPerBit = 0.6931471805599453; // ln 2

} // namespace cslm
