#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace cslm {

enum class VocabTag : uint8_t { L1, L2, Shared, Special };

const char* tag_name(VocabTag t);
VocabTag tag_from_name(const std::string& s);

// Shared bilingual vocabulary. Ids are dense 0..V-1; id 0 is <unk> and
// id 1 is <eos>, both tagged Special. A word is tagged L1 or L2 if it
// occurs in exactly one corpus, Shared if it occurs in both.
class Vocabulary {
public:
    static constexpr int32_t kUnkId = 0;
    static constexpr int32_t kEosId = 1;
    static constexpr const char* kUnkWord = "<unk>";
    static constexpr const char* kEosWord = "<eos>";

    Vocabulary();

    int32_t size() const { return static_cast<int32_t>(words_.size()); }
    const std::string& word(int32_t id) const { return words_.at(id); }
    VocabTag tag(int32_t id) const { return tags_.at(id); }
    int64_t count(int32_t id) const { return counts_.at(id); }

    bool contains(const std::string& w) const { return index_.count(w) != 0; }
    int32_t id_of(const std::string& w) const { return index_.at(w); }

    // ids sharing a tag, ascending id order
    std::vector<int32_t> ids_with_tag(VocabTag t) const;

    // FNV-1a 64 over the canonical TSV body; binds checkpoints to the
    // vocabulary they were trained with.
    uint64_t content_hash() const;

    void save_tsv(const std::string& path) const;
    static Vocabulary load_tsv(const std::string& path);

private:
    friend Vocabulary build_vocab(const std::vector<std::string>&, const std::vector<std::string>&);
    int32_t add_word(const std::string& w, VocabTag t);
    std::string tsv_body() const;

    std::vector<std::string> words_;
    std::vector<VocabTag> tags_;
    std::vector<int64_t> counts_;
    std::unordered_map<std::string, int32_t> index_;
};

// Whitespace tokenization, one sentence per line; appends <eos> after each
// line. Rejects invalid UTF-8 with the offending byte offset.
std::vector<std::string> tokenize_lines(const std::string& text);

// Reads a corpus file and tokenizes it.
std::vector<std::string> tokenize_file(const std::string& path);

// Builds the shared vocabulary from both monolingual token sequences.
// Every distinct word gets an id; no frequency cutoff.
Vocabulary build_vocab(const std::vector<std::string>& l1_tokens,
                       const std::vector<std::string>& l2_tokens);

// Word id, or <unk> for out-of-vocabulary words.
int32_t lookup_or_unk(const Vocabulary& vocab, const std::string& word);

uint64_t fnv1a64(const void* data, size_t n);

} // namespace cslm
