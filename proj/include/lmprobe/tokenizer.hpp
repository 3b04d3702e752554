#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmprobe {

// One subtoken and the byte range of the original text it covers. Spans of
// an encoding tile the text: contiguous, non-overlapping, full coverage.
struct TokenSpan {
    int token_id = 0;
    std::size_t byte_start = 0;
    std::size_t byte_end = 0;
};

// [first, last) range of token indices
struct TokenRange {
    int first = 0;
    int last = 0;
    int size() const { return last - first; }
};

class Vocabulary {
public:
    // Published two-file form: JSON symbol->id map plus ranked merges.
    static Vocabulary load(const std::filesystem::path& vocab_json,
                           const std::filesystem::path& merges_txt);

    int vocab_size() const { return static_cast<int>(id_to_bytes_.size()); }

    const std::string& bytes_of(int id) const;
    int id_of_symbol(const std::string& symbol) const;  // -1 when absent
    int merge_rank(const std::string& left, const std::string& right) const;  // INT_MAX when absent
    const std::string& byte_symbol(unsigned char byte) const { return byte_symbols_[byte]; }

private:
    std::vector<std::string> id_to_bytes_;               // id -> raw bytes
    std::unordered_map<std::string, int> symbol_to_id_;  // byte-unicode symbol -> id
    std::unordered_map<std::string, int> merge_ranks_;   // "left\nright" -> rank
    std::string byte_symbols_[256];                      // byte -> symbol (utf-8)
};

class Tokenizer {
public:
    explicit Tokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}
    static Tokenizer load(const std::filesystem::path& vocab_json,
                          const std::filesystem::path& merges_txt);

    const Vocabulary& vocabulary() const { return vocab_; }

    // Total on arbitrary byte strings; decode(encode(s)) == s.
    std::vector<TokenSpan> encode(std::string_view text) const;
    std::string decode(std::span<const int> ids) const;

    static std::vector<int> ids(std::span<const TokenSpan> spans);

private:
    Vocabulary vocab_;
};

// Minimal contiguous token index range whose byte coverage includes
// [byte_start, byte_end); a token whose span merely overlaps the range
// counts (this is what absorbs the leading-space convention).
TokenRange locate_span(std::span<const TokenSpan> spans, std::size_t byte_start,
                       std::size_t byte_end);

}  // namespace lmprobe
