#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "lmprobe/tokenizer.hpp"
#include "support/test_support.hpp"

using namespace lmprobe;
using lmprobe::testing::data_root;
using lmprobe::testing::scratch_dir;

namespace {

const Tokenizer& gpt2_tokenizer() {
    static const Tokenizer tok = Tokenizer::load(
        data_root() / "assets" / "gpt2-vocab" / "vocab.json",
        data_root() / "assets" / "gpt2-vocab" / "merges.txt");
    return tok;
}

}  // namespace

TEST_CASE("golden ids from the reference tokenizer") {
    const Tokenizer& tok = gpt2_tokenizer();

    std::ifstream in(data_root() / "tests" / "data" / "tokenizer" / "golden_ids.json");
    REQUIRE(in);
    nlohmann::json doc;
    in >> doc;
    for (const auto& entry : doc.at("cases")) {
        const std::string text = entry.at("text").get<std::string>();
        const auto expected = entry.at("ids").get<std::vector<int>>();
        const auto spans = tok.encode(text);
        CHECK_MESSAGE(Tokenizer::ids(spans) == expected, "text: '", text, "'");
        CHECK(tok.decode(Tokenizer::ids(spans)) == text);
    }
}

TEST_CASE("empty text encodes to nothing") {
    CHECK(gpt2_tokenizer().encode("").empty());
    CHECK(gpt2_tokenizer().decode(std::vector<int>{}) == "");
}

TEST_CASE("spans tile the text") {
    const Tokenizer& tok = gpt2_tokenizer();
    const std::string text = "The slogan on the posters were designed to get attention.";
    const auto spans = tok.encode(text);
    std::size_t cursor = 0;
    for (const TokenSpan& s : spans) {
        CHECK(s.byte_start == cursor);
        CHECK(s.byte_end > s.byte_start);
        cursor = s.byte_end;
    }
    CHECK(cursor == text.size());
}

TEST_CASE("round trip over multibyte text") {
    const Tokenizer& tok = gpt2_tokenizer();
    const std::string text = "naïve déjà-vu";
    CHECK(tok.decode(Tokenizer::ids(tok.encode(text))) == text);
}

TEST_CASE("round trip is total over arbitrary bytes") {
    const Tokenizer& tok = gpt2_tokenizer();
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 64);
    for (int rep = 0; rep < 200; ++rep) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(byte(rng)));
        const auto spans = tok.encode(s);
        CHECK(tok.decode(Tokenizer::ids(spans)) == s);
    }
}

TEST_CASE("encode is deterministic") {
    const Tokenizer& tok = gpt2_tokenizer();
    const std::string text = "Greedy merges, applied twice, agree.";
    const auto a = tok.encode(text);
    const auto b = tok.encode(text);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].token_id == b[i].token_id);
        CHECK(a[i].byte_start == b[i].byte_start);
    }
}

TEST_CASE("decode rejects out-of-range ids") {
    const Tokenizer& tok = gpt2_tokenizer();
    CHECK_THROWS_AS(tok.decode(std::vector<int>{50257}), std::out_of_range);
    CHECK_THROWS_AS(tok.decode(std::vector<int>{-1}), std::out_of_range);
}

TEST_CASE("locate_span picks the covering token range") {
    const Tokenizer& tok = gpt2_tokenizer();
    const std::string text = "The slogan on the posters were designed to get attention.";
    const auto spans = tok.encode(text);

    // exactly one token: "The" is [0, 3)
    const auto the = locate_span(spans, 0, 3);
    CHECK(the.first == 0);
    CHECK(the.last == 1);

    // a word annotated without its leading space snaps to the covering token
    const std::size_t were_at = text.find("were");
    const auto were = locate_span(spans, were_at, were_at + 4);
    CHECK(were.size() == 1);
    CHECK(spans[static_cast<std::size_t>(were.first)].byte_start == were_at - 1);
    CHECK(tok.decode(std::vector<int>{spans[static_cast<std::size_t>(were.first)].token_id}) ==
          " were");

    // a range straddling two tokens returns both
    const auto straddle = locate_span(spans, 2, 5);
    CHECK(straddle.size() == 2);

    CHECK_THROWS_AS(locate_span(spans, 0, text.size() + 1), std::out_of_range);
    CHECK_THROWS_AS(locate_span(spans, 10, 9), std::out_of_range);
}

TEST_CASE("locate_span on a multi-token word") {
    const Tokenizer& tok = gpt2_tokenizer();
    // "themselves" in the reflexive materials
    const std::string text =
        "The basketball coach who trained the star players usually blamed themselves for the loss.";
    const auto spans = tok.encode(text);
    const std::size_t at = text.find("themselves");
    const auto range = locate_span(spans, at, at + 10);
    std::string bytes;
    for (int i = range.first; i < range.last; ++i) {
        bytes += tok.decode(std::vector<int>{spans[static_cast<std::size_t>(i)].token_id});
    }
    CHECK(bytes == " themselves");
}

TEST_CASE("vocabulary load failures") {
    const auto dir = scratch_dir("vocab");

    {
        std::ofstream v(dir / "vocab.json");
        v << R"({"a": 0, "b": 0})";  // duplicate id
        std::ofstream m(dir / "merges.txt");
        m << "#version\n";
    }
    CHECK_THROWS_AS(Vocabulary::load(dir / "vocab.json", dir / "merges.txt"), std::runtime_error);

    {
        std::ofstream v(dir / "vocab2.json");
        v << R"({"a": 0, "b": 1})";
        std::ofstream m(dir / "merges2.txt");
        m << "a c\n";  // "ac" is not a vocabulary entry
    }
    CHECK_THROWS_AS(Vocabulary::load(dir / "vocab2.json", dir / "merges2.txt"), std::runtime_error);

    CHECK_THROWS_AS(Vocabulary::load(dir / "missing.json", dir / "merges.txt"), std::runtime_error);
}

TEST_CASE("BPE applies merges by rank on a toy vocabulary") {
    const auto dir = scratch_dir("vocab");
    {
        std::ofstream v(dir / "vocab.json");
        // minimal alphabet plus merge products
        v << R"({"a": 0, "b": 1, "c": 2, "ab": 3, "abc": 4, "bc": 5})";
        std::ofstream m(dir / "merges.txt");
        m << "#version: toy\n";
        m << "a b\n";   // rank 0
        m << "ab c\n";  // rank 1
        m << "b c\n";   // rank 2
    }
    const Tokenizer tok(Vocabulary::load(dir / "vocab.json", dir / "merges.txt"));

    // "abc": "a b" merges first (rank 0), then "ab c" -> single token 4
    const auto spans = tok.encode("abc");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].token_id == 4);
    CHECK(spans[0].byte_start == 0);
    CHECK(spans[0].byte_end == 3);

    // "bc" only has the rank-2 merge
    const auto spans2 = tok.encode("bc");
    REQUIRE(spans2.size() == 1);
    CHECK(spans2[0].token_id == 5);

    // "cab": "c" cannot merge leftward; "a b" still applies
    const auto spans3 = tok.encode("cab");
    REQUIRE(spans3.size() == 2);
    CHECK(spans3[0].token_id == 2);
    CHECK(spans3[1].token_id == 3);
}
