#include "cslm/corpus.hpp"

#include <stdexcept>

namespace cslm {

const char* lang_name(LangLabel l) {
    switch (l) {
        case LangLabel::L1: return "L1";
        case LangLabel::L2: return "L2";
        case LangLabel::CS: return "CS";
    }
    return "?";
}

TokenStream to_stream(const Vocabulary& vocab, const std::vector<std::string>& words, LangLabel label) {
    TokenStream s;
    s.label = label;
    s.ids.reserve(words.size());
    for (const auto& w : words) {
        const int32_t id = lookup_or_unk(vocab, w);
        if (id == Vocabulary::kUnkId && w != Vocabulary::kUnkWord) s.oov_count += 1;
        s.ids.push_back(id);
    }
    return s;
}

std::vector<std::string> detokenize(const Vocabulary& vocab, const TokenStream& stream) {
    std::vector<std::string> out;
    out.reserve(stream.ids.size());
    for (int32_t id : stream.ids) out.push_back(vocab.word(id));
    return out;
}

std::pair<TokenStream, TokenStream> equalize(const TokenStream& a, const TokenStream& b) {
    if (a.ids.empty() || b.ids.empty())
        throw std::runtime_error("equalize: both streams must be non-empty");
    if (a.length() == b.length()) return {a, b};
    const TokenStream& longer = a.length() > b.length() ? a : b;
    const TokenStream& shorter = a.length() > b.length() ? b : a;
    TokenStream grown = shorter;
    grown.ids.reserve(longer.ids.size());
    const size_t n = shorter.ids.size();
    size_t i = 0;
    while (grown.ids.size() < longer.ids.size()) {
        grown.ids.push_back(shorter.ids[i]);
        i = (i + 1) % n;
    }
    if (a.length() > b.length()) return {a, grown};
    return {grown, b};
}

StreamMatrix batchify(const TokenStream& stream, int batch_size) {
    if (batch_size < 1) throw std::runtime_error("batchify: batch_size must be >= 1");
    const int64_t len = stream.length();
    if (len < 2 * static_cast<int64_t>(batch_size))
        throw std::runtime_error("batchify: stream of " + std::to_string(len) +
                                 " tokens is too short; need at least " +
                                 std::to_string(2 * batch_size) + " (2 x batch_size) so every "
                                 "row has room for a target shift");
    StreamMatrix m;
    m.rows = batch_size;
    m.cols = len / batch_size;
    m.label = stream.label;
    m.ids.resize(static_cast<size_t>(m.rows) * m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int64_t c = 0; c < m.cols; ++c)
            m.ids[static_cast<size_t>(r) * m.cols + c] = stream.ids[static_cast<size_t>(r) * m.cols + c];
    return m;
}

std::vector<Batch> chunk_bptt(const StreamMatrix& m, int bptt_steps) {
    if (bptt_steps < 1) throw std::runtime_error("chunk_bptt: bptt_steps must be >= 1");
    if (m.cols < static_cast<int64_t>(bptt_steps) + 1)
        throw std::runtime_error("chunk_bptt: matrix has " + std::to_string(m.cols) +
                                 " columns; need at least bptt_steps+1 = " +
                                 std::to_string(bptt_steps + 1));
    std::vector<Batch> out;
    for (int64_t k = 0; k + 1 < m.cols; k += bptt_steps) {
        const int w = static_cast<int>(std::min<int64_t>(bptt_steps, m.cols - 1 - k));
        Batch b;
        b.steps = w;
        b.batch_size = m.rows;
        b.lang = m.label;
        b.input.resize(static_cast<size_t>(w) * m.rows);
        b.target.resize(static_cast<size_t>(w) * m.rows);
        for (int t = 0; t < w; ++t) {
            for (int r = 0; r < m.rows; ++r) {
                b.input[static_cast<size_t>(t) * m.rows + r] = m.at(r, k + t);
                b.target[static_cast<size_t>(t) * m.rows + r] = m.at(r, k + t + 1);
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Batch> interleave_schedule(const std::vector<Batch>& l1_batches,
                                       const std::vector<Batch>& l2_batches) {
    if (l1_batches.size() != l2_batches.size())
        throw std::runtime_error("interleave_schedule: batch lists differ in length (" +
                                 std::to_string(l1_batches.size()) + " vs " +
                                 std::to_string(l2_batches.size()) +
                                 "); corpora were not equalized");
    std::vector<Batch> out;
    out.reserve(l1_batches.size() * 2);
    for (size_t i = 0; i < l1_batches.size(); ++i) {
        out.push_back(l1_batches[i]);
        out.back().lang = LangLabel::L1;
        out.push_back(l2_batches[i]);
        out.back().lang = LangLabel::L2;
    }
    return out;
}

} // namespace cslm
