#include "lmprobe/tokenizer.hpp"

#include <algorithm>
#include <climits>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lmprobe/unicode_tables.hpp"

namespace lmprobe {

namespace {

// ---------------------------------------------------------------------------
// byte <-> unicode symbol mapping of byte-level BPE
// ---------------------------------------------------------------------------

std::string encode_utf8(std::uint32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

struct ByteUnicodeMap {
    std::string byte_to_symbol[256];
    std::unordered_map<std::string, unsigned char> symbol_to_byte;

    ByteUnicodeMap() {
        bool direct[256] = {};
        auto mark = [&](int lo, int hi) {
            for (int b = lo; b <= hi; ++b) direct[b] = true;
        };
        mark('!', '~');
        mark(0xA1, 0xAC);
        mark(0xAE, 0xFF);
        int next = 0;
        for (int b = 0; b < 256; ++b) {
            const std::uint32_t cp = direct[b] ? static_cast<std::uint32_t>(b)
                                               : static_cast<std::uint32_t>(256 + next++);
            byte_to_symbol[b] = encode_utf8(cp);
            symbol_to_byte.emplace(byte_to_symbol[b], static_cast<unsigned char>(b));
        }
    }
};

const ByteUnicodeMap& byte_map() {
    static const ByteUnicodeMap m;
    return m;
}

// symbol string (byte-unicode space) -> raw bytes; returns false on any
// codepoint outside the 256-symbol alphabet
bool symbol_to_bytes(const std::string& symbol, std::string& out) {
    const auto& m = byte_map();
    std::size_t i = 0;
    while (i < symbol.size()) {
        std::size_t len = 1;
        const unsigned char c = static_cast<unsigned char>(symbol[i]);
        if ((c & 0x80) != 0) {
            if ((c & 0xE0) == 0xC0) len = 2;
            else if ((c & 0xF0) == 0xE0) len = 3;
            else len = 4;
        }
        if (i + len > symbol.size()) return false;
        auto it = m.symbol_to_byte.find(symbol.substr(i, len));
        if (it == m.symbol_to_byte.end()) return false;
        out.push_back(static_cast<char>(it->second));
        i += len;
    }
    return true;
}

// ---------------------------------------------------------------------------
// pre-tokenizer
// ---------------------------------------------------------------------------

enum class CharClass : std::uint8_t { Letter, Number, Whitespace, Other };

bool in_ranges(std::uint32_t cp, std::span<const uni::CodepointRange> ranges) {
    auto it = std::upper_bound(ranges.begin(), ranges.end(), cp,
                               [](std::uint32_t v, const uni::CodepointRange& r) { return v < r.first; });
    return it != ranges.begin() && cp <= std::prev(it)->last;
}

CharClass classify(std::uint32_t cp) {
    if (cp < 128) {
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::Letter;
        if (cp >= '0' && cp <= '9') return CharClass::Number;
        if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return CharClass::Whitespace;
        return CharClass::Other;
    }
    if (cp > 0x10FFFF) return CharClass::Other;  // synthetic unit for an invalid byte
    if (in_ranges(cp, uni::kLetterRanges)) return CharClass::Letter;
    if (in_ranges(cp, uni::kNumberRanges)) return CharClass::Number;
    if (in_ranges(cp, uni::kWhitespace)) return CharClass::Whitespace;
    return CharClass::Other;
}

struct Unit {
    std::uint32_t cp;
    std::uint32_t byte_start;
    std::uint32_t byte_len;
    CharClass cls;
};

// Decodes UTF-8 into scanner units. Bytes that do not form valid UTF-8
// become one unit each with a synthetic codepoint above the Unicode range,
// preserving totality and exact byte round-trips.
std::vector<Unit> decode_units(std::string_view text) {
    std::vector<Unit> units;
    units.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::uint32_t cp = 0;
        std::size_t len = 0;
        if (c < 0x80) {
            cp = c;
            len = 1;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool ok = len != 0 && i + len <= text.size();
        if (ok) {
            for (std::size_t k = 1; k < len; ++k) {
                const unsigned char cc = static_cast<unsigned char>(text[i + k]);
                if ((cc & 0xC0) != 0x80) {
                    ok = false;
                    break;
                }
                cp = (cp << 6) | (cc & 0x3F);
            }
        }
        if (ok && len > 1) {
            // reject overlong forms and surrogates so decode stays canonical
            if (cp < 0x80 || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
                (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
                ok = false;
            }
        }
        if (!ok) {
            cp = 0x110000u + c;
            len = 1;
        }
        units.push_back({cp, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(len),
                         classify(cp)});
        i += len;
    }
    return units;
}

// Reproduces the published split pattern:
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
struct PreToken {
    std::size_t byte_start;
    std::size_t byte_end;
};

std::vector<PreToken> pre_tokenize(std::string_view text) {
    const std::vector<Unit> units = decode_units(text);
    const std::size_t n = units.size();
    std::vector<PreToken> out;

    auto emit = [&](std::size_t first, std::size_t last) {  // [first, last) unit range
        out.push_back({units[first].byte_start,
                       units[last - 1].byte_start + units[last - 1].byte_len});
    };
    auto run_end = [&](std::size_t from, CharClass cls) {
        std::size_t j = from;
        while (j < n && units[j].cls == cls) ++j;
        return j;
    };

    std::size_t u = 0;
    while (u < n) {
        const Unit& c = units[u];

        if (c.cp == '\'' && u + 1 < n) {
            const std::uint32_t c1 = units[u + 1].cp;
            const std::uint32_t c2 = u + 2 < n ? units[u + 2].cp : 0;
            if ((c1 == 'r' && c2 == 'e') || (c1 == 'v' && c2 == 'e') || (c1 == 'l' && c2 == 'l')) {
                emit(u, u + 3);
                u += 3;
                continue;
            }
            if (c1 == 's' || c1 == 't' || c1 == 'm' || c1 == 'd') {
                emit(u, u + 2);
                u += 2;
                continue;
            }
        }

        if (c.cp == ' ' && u + 1 < n && units[u + 1].cls != CharClass::Whitespace) {
            const std::size_t j = run_end(u + 1, units[u + 1].cls);
            emit(u, j);
            u = j;
            continue;
        }

        if (c.cls == CharClass::Whitespace) {
            const std::size_t j = run_end(u, CharClass::Whitespace);
            if (j == n) {
                emit(u, j);  // trailing whitespace keeps its full run
                u = j;
            } else if (j - u >= 2) {
                emit(u, j - 1);  // last whitespace char joins the next word
                u = j - 1;
            } else {
                emit(u, j);  // lone non-space whitespace before a non-space
                u = j;
            }
            continue;
        }

        const std::size_t j = run_end(u, c.cls);
        emit(u, j);
        u = j;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary Vocabulary::load(const std::filesystem::path& vocab_json,
                            const std::filesystem::path& merges_txt) {
    Vocabulary v;
    const auto& bm = byte_map();
    for (int b = 0; b < 256; ++b) v.byte_symbols_[b] = bm.byte_to_symbol[b];

    std::ifstream in(vocab_json);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open vocabulary '{}'", vocab_json.string()));
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("malformed vocabulary '{}': {}", vocab_json.string(), e.what()));
    }
    if (!doc.is_object() || doc.empty()) {
        throw std::runtime_error(fmt::format("vocabulary '{}' is not a non-empty JSON object",
                                             vocab_json.string()));
    }

    const int size = static_cast<int>(doc.size());
    v.id_to_bytes_.assign(size, {});
    std::vector<bool> seen(size, false);
    v.symbol_to_id_.reserve(doc.size() * 2);
    for (const auto& [symbol, id_json] : doc.items()) {
        const int id = id_json.get<int>();
        if (id < 0 || id >= size || seen[id]) {
            throw std::runtime_error(fmt::format(
                "vocabulary '{}': ids must form a bijection onto [0, {}); id {} repeats or is out of range",
                vocab_json.string(), size, id));
        }
        seen[id] = true;
        std::string bytes;
        if (!symbol_to_bytes(symbol, bytes)) {
            throw std::runtime_error(fmt::format(
                "vocabulary entry {} ('{}') contains codepoints outside the byte-symbol alphabet",
                id, symbol));
        }
        v.id_to_bytes_[id] = std::move(bytes);
        v.symbol_to_id_.emplace(symbol, id);
    }

    std::ifstream merges(merges_txt);
    if (!merges) {
        throw std::runtime_error(fmt::format("cannot open merges '{}'", merges_txt.string()));
    }
    std::string line;
    int rank = 0;
    while (std::getline(merges, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
            line.find(' ', sp + 1) != std::string::npos) {
            throw std::runtime_error(fmt::format(
                "merges '{}' line {}: expected two space-separated symbols, got '{}'",
                merges_txt.string(), rank + 1, line));
        }
        const std::string left = line.substr(0, sp);
        const std::string right = line.substr(sp + 1);
        if (v.symbol_to_id_.find(left + right) == v.symbol_to_id_.end()) {
            throw std::runtime_error(fmt::format(
                "merge rule '{} {}' concatenates to a symbol missing from the vocabulary", left, right));
        }
        v.merge_ranks_.emplace(left + "\n" + right, rank++);
    }
    return v;
}

const std::string& Vocabulary::bytes_of(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw std::out_of_range(fmt::format("token id {} outside vocabulary of size {}", id, vocab_size()));
    }
    return id_to_bytes_[static_cast<std::size_t>(id)];
}

int Vocabulary::id_of_symbol(const std::string& symbol) const {
    auto it = symbol_to_id_.find(symbol);
    return it == symbol_to_id_.end() ? -1 : it->second;
}

int Vocabulary::merge_rank(const std::string& left, const std::string& right) const {
    auto it = merge_ranks_.find(left + "\n" + right);
    return it == merge_ranks_.end() ? INT_MAX : it->second;
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

Tokenizer Tokenizer::load(const std::filesystem::path& vocab_json,
                          const std::filesystem::path& merges_txt) {
    return Tokenizer(Vocabulary::load(vocab_json, merges_txt));
}

std::vector<TokenSpan> Tokenizer::encode(std::string_view text) const {
    std::vector<TokenSpan> spans;
    if (text.empty()) return spans;

    struct Piece {
        std::string sym;
        std::uint32_t n_bytes;
    };
    std::vector<Piece> word, merged;

    for (const PreToken& pt : pre_tokenize(text)) {
        word.clear();
        for (std::size_t b = pt.byte_start; b < pt.byte_end; ++b) {
            word.push_back({vocab_.byte_symbol(static_cast<unsigned char>(text[b])), 1});
        }

        while (word.size() > 1) {
            int best_rank = INT_MAX;
            std::size_t best = 0;
            for (std::size_t i = 0; i + 1 < word.size(); ++i) {
                const int r = vocab_.merge_rank(word[i].sym, word[i + 1].sym);
                if (r < best_rank) {
                    best_rank = r;
                    best = i;
                }
            }
            if (best_rank == INT_MAX) break;

            const std::string first = word[best].sym;
            const std::string second = word[best + 1].sym;
            merged.clear();
            std::size_t i = 0;
            while (i < word.size()) {
                std::size_t j = i;
                while (j < word.size() && word[j].sym != first) ++j;
                if (j == word.size()) {
                    merged.insert(merged.end(), word.begin() + i, word.end());
                    break;
                }
                merged.insert(merged.end(), word.begin() + i, word.begin() + j);
                i = j;
                if (i + 1 < word.size() && word[i + 1].sym == second) {
                    merged.push_back({first + second, word[i].n_bytes + word[i + 1].n_bytes});
                    i += 2;
                } else {
                    merged.push_back(word[i]);
                    ++i;
                }
            }
            word.swap(merged);
        }

        std::size_t byte_pos = pt.byte_start;
        for (const Piece& piece : word) {
            const int id = vocab_.id_of_symbol(piece.sym);
            if (id < 0) {
                // unreachable when the vocabulary passes its load-time checks
                throw std::runtime_error(fmt::format("BPE produced symbol '{}' missing from vocabulary",
                                                     piece.sym));
            }
            spans.push_back({id, byte_pos, byte_pos + piece.n_bytes});
            byte_pos += piece.n_bytes;
        }
    }
    return spans;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) out += vocab_.bytes_of(id);
    return out;
}

std::vector<int> Tokenizer::ids(std::span<const TokenSpan> spans) {
    std::vector<int> out;
    out.reserve(spans.size());
    for (const TokenSpan& s : spans) out.push_back(s.token_id);
    return out;
}

TokenRange locate_span(std::span<const TokenSpan> spans, std::size_t byte_start,
                       std::size_t byte_end) {
    const std::size_t text_size = spans.empty() ? 0 : spans.back().byte_end;
    if (byte_start > byte_end || byte_end > text_size) {
        throw std::out_of_range(fmt::format(
            "byte range [{}, {}) lies outside the encoded text of {} bytes",
            byte_start, byte_end, text_size));
    }

    int first = -1, last = -1;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const TokenSpan& s = spans[i];
        const bool overlaps = byte_start == byte_end
                                  ? (s.byte_start <= byte_start && byte_start < s.byte_end)
                                  : (s.byte_end > byte_start && s.byte_start < byte_end);
        if (overlaps) {
            if (first < 0) first = static_cast<int>(i);
            last = static_cast<int>(i) + 1;
        }
    }
    if (first < 0) {
        throw std::out_of_range(fmt::format("byte range [{}, {}) covers no token", byte_start, byte_end));
    }
    return {first, last};
}

}  // namespace lmprobe
