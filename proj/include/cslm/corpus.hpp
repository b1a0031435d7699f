#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cslm/vocab.hpp"

namespace cslm {

enum class LangLabel : uint8_t { L1, L2, CS };

const char* lang_name(LangLabel l);

// A flat token-id sequence with its source-language label.
struct TokenStream {
    std::vector<int32_t> ids;

    LangLabel label = LangLabel::L1;
    // tokens that mapped to <unk> because the word was absent from the vocabulary
    int64_t oov_count = 0;

    int64_t length() const { return static_cast<int64_t>(ids.size()); }
};

// One truncated-BPTT chunk. input and target are [steps x batch_size]
// row-major; target[t][b] is the stream token right after input[t][b].
struct Batch {
    int steps = 0;
    int batch_size = 0;
    std::vector<int32_t> input;
    std::vector<int32_t> target;
    LangLabel lang = LangLabel::L1;

    int32_t in_at(int t, int b) const { return input[static_cast<size_t>(t) * batch_size + b]; }
    int32_t tgt_at(int t, int b) const { return target[static_cast<size_t>(t) * batch_size + b]; }
};

// batch_size parallel contiguous segments of the stream, trailing
// remainder dropped. rows = batch_size, cols = len / batch_size.
struct StreamMatrix {
    int rows = 0;
    int64_t cols = 0;
    std::vector<int32_t> ids; // row-major
    LangLabel label = LangLabel::L1;

    int32_t at(int r, int64_t c) const { return ids[static_cast<size_t>(r) * cols + c]; }
};

// Maps words to ids through the vocabulary, counting OOV hits.
TokenStream to_stream(const Vocabulary& vocab, const std::vector<std::string>& words, LangLabel label);

// Inverse of to_stream for round-trip checks.
std::vector<std::string> detokenize(const Vocabulary& vocab, const TokenStream& stream);

// Extends the shorter stream by cyclic repetition of its own tokens until
// both lengths match. The longer stream passes through untouched.
std::pair<TokenStream, TokenStream> equalize(const TokenStream& a, const TokenStream& b);

StreamMatrix batchify(const TokenStream& stream, int batch_size);

// Consecutive non-overlapping chunks of up to bptt_steps columns; the final
// short chunk is kept if it has at least one step.
std::vector<Batch> chunk_bptt(const StreamMatrix& m, int bptt_steps);

// [l1[0], l2[0], l1[1], l2[1], ...]; labels alternate strictly starting with L1.
std::vector<Batch> interleave_schedule(const std::vector<Batch>& l1_batches,
                                       const std::vector<Batch>& l2_batches);

} // namespace cslm
