#include "cslm/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "cslm/rng.hpp"

namespace cslm {

void SyntheticSpec::validate() const {
    if (states < 1) throw std::runtime_error("synthetic spec: states must be >= 1");
    if (words_per_language < states)
        throw std::runtime_error("synthetic spec: words_per_language (" +
                                 std::to_string(words_per_language) +
                                 ") must be >= states (" + std::to_string(states) + ")");
    if (tokens_per_language < 1 || cs_tokens < 1)
        throw std::runtime_error("synthetic spec: token targets must be positive");
    if (switch_prob < 0.0 || switch_prob > 1.0)
        throw std::runtime_error("synthetic spec: switch_prob must be in [0,1]");
    if (mean_sentence_len < 1.0)
        throw std::runtime_error("synthetic spec: mean_sentence_len must be >= 1");
}

namespace {

std::string make_word(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix, index);
    return buf;
}

// Zipf weight over a bucket: P(rank j) ∝ 1/(1+j)
double zipf_norm(size_t bucket_size) {
    double s = 0.0;
    for (size_t j = 0; j < bucket_size; ++j) s += 1.0 / (1.0 + static_cast<double>(j));
    return s;
}

double zipf_prob(size_t rank, size_t bucket_size) {
    return (1.0 / (1.0 + static_cast<double>(rank))) / zipf_norm(bucket_size);
}

size_t sample_zipf(Rng& rng, size_t bucket_size) {
    const double u = rng.next_double() * zipf_norm(bucket_size);
    double acc = 0.0;
    for (size_t j = 0; j + 1 < bucket_size; ++j) {
        acc += 1.0 / (1.0 + static_cast<double>(j));
        if (u < acc) return j;
    }
    return bucket_size - 1;
}

int sample_row(Rng& rng, const Mat<double>& t, int row) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (int j = 0; j + 1 < t.cols; ++j) {
        acc += t(row, j);
        if (u < acc) return j;
    }
    return t.cols - 1;
}

// strong connectivity of the transition support graph
bool is_ergodic(const Mat<double>& t) {
    const int s = t.rows;
    auto reach = [&](bool forward) {
        std::vector<char> seen(s, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < s; ++v) {
                const double w = forward ? t(u, v) : t(v, u);
                if (w > 1e-12 && !seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        for (char c : seen)
            if (!c) return false;
        return true;
    };
    return reach(true) && reach(false);
}

// unique stationary distribution of a row-stochastic matrix, by solving
// mu (P - I) = 0 with a normalization row (Gaussian elimination)
std::vector<double> stationary(const Mat<double>& p) {
    const int n = p.rows;
    // A^T mu = b where A = (P^T - I) with the last equation replaced by sum = 1
    std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> b(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<size_t>(i) * n + j] = p(j, i) - (i == j ? 1.0 : 0.0);
    for (int j = 0; j < n; ++j) a[static_cast<size_t>(n - 1) * n + j] = 1.0;
    b[n - 1] = 1.0;
    // partial pivoting
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[static_cast<size_t>(r) * n + col]) >
                std::abs(a[static_cast<size_t>(piv) * n + col]))
                piv = r;
        if (std::abs(a[static_cast<size_t>(piv) * n + col]) < 1e-12)
            throw std::runtime_error("oracle_cross_entropy: transition matrix is not ergodic "
                                     "(stationary distribution is not unique)");
        if (piv != col) {
            for (int j = 0; j < n; ++j)
                std::swap(a[static_cast<size_t>(piv) * n + j], a[static_cast<size_t>(col) * n + j]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a[static_cast<size_t>(r) * n + col] / a[static_cast<size_t>(col) * n + col];
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j)
                a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> mu(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int j = r + 1; j < n; ++j) s -= a[static_cast<size_t>(r) * n + j] * mu[j];
        mu[r] = s / a[static_cast<size_t>(r) * n + r];
    }
    for (double& v : mu) v = std::max(v, 0.0);
    double total = 0.0;
    for (double v : mu) total += v;
    for (double& v : mu) v /= total;
    return mu;
}

inline double plogp(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

} // namespace

LatentGrammar generate_grammar(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    LatentGrammar g;
    const int s = spec.states;
    g.transition = Mat<double>(s, s);
    for (int i = 0; i < s; ++i) {
        double sum = 0.0;
        for (int j = 0; j < s; ++j) {
            // -log(1-u) exponentials normalize to a uniform point on the simplex
            const double e = -std::log(1.0 - rng.next_double());
            g.transition(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < s; ++j) g.transition(i, j) /= sum;
    }
    g.eos_prob = 1.0 / spec.mean_sentence_len;
    g.start_state = 0;
    // contiguous bucket partition of each language's words across states
    const int w = spec.words_per_language;
    g.emit_l1.resize(s);
    g.emit_l2.resize(s);
    for (int st = 0; st < s; ++st) {
        const int lo = static_cast<int>(static_cast<int64_t>(st) * w / s);
        const int hi = static_cast<int>(static_cast<int64_t>(st + 1) * w / s);
        for (int i = lo; i < hi; ++i) {
            g.emit_l1[st].push_back(make_word("x", i));
            g.emit_l2[st].push_back(make_word("y", i));
        }
    }
    return g;
}

namespace {

SynthText generate_text(const LatentGrammar& g, LangLabel label, LangLabel start_lang,
                        int64_t token_target, double switch_prob, uint64_t seed) {
    if (token_target < 1) throw std::runtime_error("generate: token target must be positive");
    Rng rng(seed);
    SynthText out;
    out.label = label;
    while (out.token_count < token_target) {
        std::string line;
        int state = g.start_state;
        LangLabel lang = start_lang;
        line += g.emissions(lang)[state][sample_zipf(rng, g.emissions(lang)[state].size())];
        out.token_count += 1;
        while (rng.next_double() >= g.eos_prob) {
            state = sample_row(rng, g.transition, state);
            if (switch_prob > 0.0 && rng.next_double() < switch_prob)
                lang = lang == LangLabel::L1 ? LangLabel::L2 : LangLabel::L1;
            line += ' ';
            line += g.emissions(lang)[state][sample_zipf(rng, g.emissions(lang)[state].size())];
            out.token_count += 1;
        }
        out.token_count += 1; // the <eos> the tokenizer will append
        out.sentences.push_back(std::move(line));
    }
    return out;
}

} // namespace

SynthText generate_monolingual(const LatentGrammar& g, LangLabel lang, int64_t token_target,
                               uint64_t seed) {
    if (token_target < 100)
        throw std::runtime_error("generate_monolingual: token_target must be >= 100");
    if (lang == LangLabel::CS)
        throw std::runtime_error("generate_monolingual: language must be L1 or L2");
    return generate_text(g, lang, lang, token_target, 0.0, seed);
}

SynthText generate_cs_test(const LatentGrammar& g, int64_t token_target, double switch_prob,
                           uint64_t seed) {
    if (switch_prob < 0.0 || switch_prob > 1.0)
        throw std::runtime_error("generate_cs_test: switch probability must be in [0,1]");
    return generate_text(g, LangLabel::CS, LangLabel::L1, token_target, switch_prob, seed);
}

double oracle_cross_entropy(const LatentGrammar& g, double switch_prob, OracleMode mode) {
    if (!is_ergodic(g.transition))
        throw std::runtime_error("oracle_cross_entropy: transition matrix is not ergodic");
    if (mode == OracleMode::CS && switch_prob == 0.0) mode = OracleMode::MonoL1;

    const int s = g.states();
    const double q = g.eos_prob;
    const bool cs = mode == OracleMode::CS;
    const int langs = cs ? 2 : 1;
    const LangLabel mono_lang = mode == OracleMode::MonoL2 ? LangLabel::L2 : LangLabel::L1;
    // extended states: (state, lang) pairs then one EOS state
    const int n = s * langs + 1;
    const int eos = n - 1;
    auto idx = [&](int st, int lg) { return lg * s + st; };

    Mat<double> p(n, n);
    for (int lg = 0; lg < langs; ++lg) {
        for (int st = 0; st < s; ++st) {
            const int row = idx(st, lg);
            p(row, eos) = q;
            for (int st2 = 0; st2 < s; ++st2) {
                for (int lg2 = 0; lg2 < langs; ++lg2) {
                    const double sw = !cs ? (lg2 == lg ? 1.0 : 0.0)
                                          : (lg2 == lg ? 1.0 - switch_prob : switch_prob);
                    if (sw == 0.0) continue;
                    p(row, idx(st2, lg2)) += (1.0 - q) * g.transition(st, st2) * sw;
                }
            }
        }
    }
    // after <eos>: a fresh sentence, first word from the start state; in CS
    // mode language index 0 is the matrix language L1
    const int start_lang = 0;
    p(eos, idx(g.start_state, start_lang)) = 1.0;

    const std::vector<double> mu = stationary(p);

    // entropy of the next-token distribution from each extended state
    double rate = 0.0;
    auto bucket = [&](int lg) -> const std::vector<std::vector<std::string>>& {
        if (!cs) return mono_lang == LangLabel::L2 ? g.emit_l2 : g.emit_l1;
        return lg == 0 ? g.emit_l1 : g.emit_l2;
    };
    for (int lg = 0; lg < langs; ++lg) {
        for (int st = 0; st < s; ++st) {
            double h = plogp(q);
            for (int st2 = 0; st2 < s; ++st2) {
                for (int lg2 = 0; lg2 < langs; ++lg2) {
                    const double sw = !cs ? (lg2 == lg ? 1.0 : 0.0)
                                          : (lg2 == lg ? 1.0 - switch_prob : switch_prob);
                    if (sw == 0.0) continue;
                    const size_t bsz = bucket(lg2)[st2].size();
                    const double base = (1.0 - q) * g.transition(st, st2) * sw;
                    for (size_t j = 0; j < bsz; ++j) h += plogp(base * zipf_prob(j, bsz));
                }
            }
            rate += mu[idx(st, lg)] * h;
        }
    }
    {
        // sentence-initial token: start state, matrix (or mono) language
        double h = 0.0;
        const size_t bsz = bucket(start_lang)[g.start_state].size();
        for (size_t j = 0; j < bsz; ++j) h += plogp(zipf_prob(j, bsz));
        rate += mu[eos] * h;
    }
    return rate / kNatsPerBit; // nats -> bits
}

double true_model_score(const LatentGrammar& g, double switch_prob, OracleMode mode,
                        const SynthText& text) {
    const bool cs = mode == OracleMode::CS;
    const LangLabel mono_lang = mode == OracleMode::MonoL2 ? LangLabel::L2 : LangLabel::L1;
    // word -> (lang, state, rank)
    struct WordInfo { LangLabel lang; int state; size_t rank; size_t bucket; };
    std::unordered_map<std::string, WordInfo> info;
    for (int st = 0; st < g.states(); ++st) {
        for (size_t j = 0; j < g.emit_l1[st].size(); ++j)
            info[g.emit_l1[st][j]] = {LangLabel::L1, st, j, g.emit_l1[st].size()};
        for (size_t j = 0; j < g.emit_l2[st].size(); ++j)
            info[g.emit_l2[st][j]] = {LangLabel::L2, st, j, g.emit_l2[st].size()};
    }
    const double q = g.eos_prob;
    double total = 0.0;
    int64_t tokens = 0;
    for (const auto& line : text.sentences) {
        int prev_state = -1;
        LangLabel prev_lang = LangLabel::L1;
        size_t pos = 0;
        bool first = true;
        while (pos < line.size()) {
            size_t sp = line.find(' ', pos);
            if (sp == std::string::npos) sp = line.size();
            const auto it = info.find(line.substr(pos, sp - pos));
            if (it == info.end())
                throw std::runtime_error("true_model_score: word not in grammar");
            const WordInfo& w = it->second;
            double prob;
            if (first) {
                const LangLabel lang0 = cs ? LangLabel::L1 : mono_lang;
                if (w.state != g.start_state || w.lang != lang0)
                    throw std::runtime_error("true_model_score: sentence does not start at the "
                                             "start state in the expected language");
                prob = zipf_prob(w.rank, w.bucket);
                first = false;
            } else {
                const double sw = !cs ? (w.lang == prev_lang ? 1.0 : 0.0)
                                      : (w.lang == prev_lang ? 1.0 - switch_prob : switch_prob);
                prob = (1.0 - q) * g.transition(prev_state, w.state) * sw *
                       zipf_prob(w.rank, w.bucket);
            }
            total += -std::log(prob);
            tokens += 1;
            prev_state = w.state;
            prev_lang = w.lang;
            pos = sp + (sp < line.size() ? 1 : 0);
        }
        total += -std::log(q); // the <eos> token
        tokens += 1;
    }
    if (tokens == 0) throw std::runtime_error("true_model_score: empty text");
    return total / static_cast<double>(tokens);
}

void write_corpus(const SynthText& text, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write corpus file: " + tmp);
        for (const auto& line : text.sentences) f << line << '\n';
        if (!f) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

std::string manifest_text(const SyntheticSpec& spec, const LatentGrammar& g) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    const double bits_l1 = oracle_cross_entropy(g, 0.0, OracleMode::MonoL1);
    const double bits_l2 = oracle_cross_entropy(g, 0.0, OracleMode::MonoL2);
    const double bits_cs = oracle_cross_entropy(g, spec.switch_prob, OracleMode::CS);
    std::string m;
    m += "format=cslm-synth-manifest v1\n";
    m += "seed=" + std::to_string(spec.seed) + "\n";
    m += "states=" + std::to_string(spec.states) + "\n";
    m += "words_per_language=" + std::to_string(spec.words_per_language) + "\n";
    m += "tokens_per_language=" + std::to_string(spec.tokens_per_language) + "\n";
    m += "cs_tokens=" + std::to_string(spec.cs_tokens) + "\n";
    m += "switch_prob=" + fmt(spec.switch_prob) + "\n";
    m += "mean_sentence_len=" + fmt(spec.mean_sentence_len) + "\n";
    m += "oracle_bits_per_token_l1=" + fmt(bits_l1) + "\n";
    m += "oracle_bits_per_token_l2=" + fmt(bits_l2) + "\n";
    m += "oracle_bits_per_token_cs=" + fmt(bits_cs) + "\n";
    m += "oracle_nats_per_token_cs=" + fmt(bits_cs * kNatsPerBit) + "\n";
    return m;
}

} // namespace cslm
