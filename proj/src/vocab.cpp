#include "cslm/vocab.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cslm {

const char* tag_name(VocabTag t) {
    switch (t) {
        case VocabTag::L1: return "L1";
        case VocabTag::L2: return "L2";
        case VocabTag::Shared: return "SHARED";
        case VocabTag::Special: return "SPECIAL";
    }
    return "?";
}

VocabTag tag_from_name(const std::string& s) {
    if (s == "L1") return VocabTag::L1;
    if (s == "L2") return VocabTag::L2;
    if (s == "SHARED") return VocabTag::Shared;
    if (s == "SPECIAL") return VocabTag::Special;
    throw std::runtime_error("unknown vocabulary tag: " + s);
}

Vocabulary::Vocabulary() {
    add_word(kUnkWord, VocabTag::Special);
    add_word(kEosWord, VocabTag::Special);
}

int32_t Vocabulary::add_word(const std::string& w, VocabTag t) {
    const int32_t id = static_cast<int32_t>(words_.size());
    words_.push_back(w);
    tags_.push_back(t);
    counts_.push_back(0);
    index_.emplace(w, id);
    return id;
}

std::vector<int32_t> Vocabulary::ids_with_tag(VocabTag t) const {
    std::vector<int32_t> out;
    for (int32_t id = 0; id < size(); ++id)
        if (tags_[id] == t) out.push_back(id);
    return out;
}

uint64_t fnv1a64(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string Vocabulary::tsv_body() const {
    std::string body;
    for (int32_t id = 0; id < size(); ++id) {
        body += words_[id];
        body += '\t';
        body += std::to_string(id);
        body += '\t';
        body += tag_name(tags_[id]);
        body += '\t';
        body += std::to_string(counts_[id]);
        body += '\n';
    }
    return body;
}

uint64_t Vocabulary::content_hash() const {
    const std::string body = tsv_body();
    return fnv1a64(body.data(), body.size());
}

void Vocabulary::save_tsv(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write vocabulary file: " + tmp);
        f << "#cslm-vocab v1\n" << tsv_body();
        if (!f) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open vocabulary file: " + path);
    std::string header;
    if (!std::getline(f, header) || header != "#cslm-vocab v1")
        throw std::runtime_error(path + ": missing '#cslm-vocab v1' header");
    Vocabulary v;
    v.words_.clear();
    v.tags_.clear();
    v.counts_.clear();
    v.index_.clear();
    std::string line;
    int32_t expect_id = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word, tag;
        int64_t id = -1, count = -1;
        if (!(ls >> word >> id >> tag >> count))
            throw std::runtime_error(path + ": malformed row: " + line);
        if (id != expect_id)
            throw std::runtime_error(path + ": ids not dense at row " + std::to_string(expect_id));
        v.add_word(word, tag_from_name(tag));
        v.counts_.back() = count;
        ++expect_id;
    }
    if (v.size() < 2 || v.word(kUnkId) != kUnkWord || v.word(kEosId) != kEosWord)
        throw std::runtime_error(path + ": reserved <unk>/<eos> rows missing");
    return v;
}

namespace {

// Returns the byte offset of the first invalid UTF-8 sequence, or -1.
int64_t utf8_invalid_at(const std::string& s) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const size_t n = s.size();
    size_t i = 0;
    while (i < n) {
        const unsigned char c = p[i];
        size_t need = 0;
        if (c < 0x80) { i += 1; continue; }
        if ((c & 0xE0) == 0xC0) { if (c < 0xC2) return static_cast<int64_t>(i); need = 1; }
        else if ((c & 0xF0) == 0xE0) need = 2;
        else if ((c & 0xF8) == 0xF0) { if (c > 0xF4) return static_cast<int64_t>(i); need = 3; }
        else return static_cast<int64_t>(i);
        if (i + need >= n) return static_cast<int64_t>(i); // truncated sequence
        for (size_t k = 1; k <= need; ++k)
            if ((p[i + k] & 0xC0) != 0x80) return static_cast<int64_t>(i);
        // overlong forms, surrogates, code points past U+10FFFF
        if (c == 0xE0 && p[i + 1] < 0xA0) return static_cast<int64_t>(i);
        if (c == 0xED && p[i + 1] >= 0xA0) return static_cast<int64_t>(i);
        if (c == 0xF0 && p[i + 1] < 0x90) return static_cast<int64_t>(i);
        if (c == 0xF4 && p[i + 1] >= 0x90) return static_cast<int64_t>(i);
        i += need + 1;
    }
    return -1;
}

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

} // namespace

std::vector<std::string> tokenize_lines(const std::string& text) {
    const int64_t bad = utf8_invalid_at(text);
    if (bad >= 0)
        throw std::runtime_error("invalid UTF-8 at byte offset " + std::to_string(bad));
    std::vector<std::string> tokens;
    if (text.empty()) return tokens;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        const size_t end = nl == std::string::npos ? text.size() : nl;
        // a trailing newline does not open a final empty line
        if (pos == text.size() && nl == std::string::npos) break;
        size_t i = pos;
        while (i < end) {
            while (i < end && is_space(text[i])) ++i;
            size_t j = i;
            while (j < end && !is_space(text[j])) ++j;
            if (j > i) tokens.emplace_back(text.substr(i, j - i));
            i = j;
        }
        tokens.emplace_back(Vocabulary::kEosWord);
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return tokens;
}

std::vector<std::string> tokenize_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open corpus file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return tokenize_lines(ss.str());
}

Vocabulary build_vocab(const std::vector<std::string>& l1_tokens,
                       const std::vector<std::string>& l2_tokens) {
    if (l1_tokens.empty() || l2_tokens.empty())
        throw std::runtime_error("build_vocab: both corpora must be non-empty; an empty "
                                 "language would make its training regime impossible");
    Vocabulary v;
    auto ingest = [&v](const std::vector<std::string>& toks, VocabTag lang) {
        for (const auto& w : toks) {
            auto it = v.index_.find(w);
            int32_t id;
            if (it == v.index_.end()) {
                id = v.add_word(w, lang);
            } else {
                id = it->second;
                VocabTag& t = v.tags_[id];
                if (t != VocabTag::Special && t != lang) t = VocabTag::Shared;
            }
            v.counts_[id] += 1;
        }
    };
    ingest(l1_tokens, VocabTag::L1);
    ingest(l2_tokens, VocabTag::L2);
    return v;
}

int32_t lookup_or_unk(const Vocabulary& vocab, const std::string& word) {
    return vocab.contains(word) ? vocab.id_of(word) : Vocabulary::kUnkId;
}

} // namespace cslm
