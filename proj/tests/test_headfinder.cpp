#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "lmprobe/headfinder.hpp"
#include "support/test_support.hpp"

using namespace lmprobe;
using namespace lmprobe::testing;

namespace {

const Tokenizer& gpt2_tokenizer() {
    static const Tokenizer tok = Tokenizer::load(
        data_root() / "assets" / "gpt2-vocab" / "vocab.json",
        data_root() / "assets" / "gpt2-vocab" / "merges.txt");
    return tok;
}

const Model& planted_model() {
    static const Model model = [] {
        const Tokenizer& tok = gpt2_tokenizer();
        const auto spans = tok.encode(" dog");
        REQUIRE(spans.size() == 1);
        const auto dir = scratch_dir("planted");
        const ModelConfig config = planted_config();
        write_safetensors(dir / "model.safetensors",
                          planted_checkpoint_tensors(config, spans[0].token_id, {2, 5}));
        return Model::load_checkpoint(dir / "model.safetensors", config);
    }();
    return model;
}

}  // namespace

TEST_CASE("conllu reader handles comments, ranges, and empty nodes") {
    const auto corpus = read_conllu(data_root() / "tests" / "data" / "corpus" / "handful.conllu");
    // h1: det, nsubj, advmod, punct (root excluded); h2: aux, advmod,
    // compound:prt, punct, nsubj (the 1-2 range and 3.1 empty node skipped)
    CHECK(corpus.size() == 9);

    const auto nsubj = filter_relation(corpus, "nsubj");
    REQUIRE(nsubj.size() == 2);
    CHECK(nsubj[0].words[static_cast<std::size_t>(nsubj[0].dependent)] == "dogs");
    CHECK(nsubj[0].words[static_cast<std::size_t>(nsubj[0].governor)] == "bark");
    CHECK(nsubj[0].dependent - nsubj[0].governor == -1);
    CHECK(nsubj[0].is_punct[4] == 1);  // the final period

    // h2 has a late nsubj with a positive offset
    CHECK(nsubj[1].dependent - nsubj[1].governor == 3);
}

TEST_CASE("conllu reader rejects malformed rows") {
    const auto dir = scratch_dir("conllu");
    {
        std::ofstream out(dir / "bad.conllu");
        out << "1\tword\tonly\tfour\tcols\n";
    }
    CHECK_THROWS_AS(read_conllu(dir / "bad.conllu"), std::runtime_error);
    {
        std::ofstream out(dir / "badhead.conllu");
        out << "1\tword\t_\tX\t_\t_\tzzz\tnsubj\t_\t_\n";
    }
    CHECK_THROWS_AS(read_conllu(dir / "badhead.conllu"), std::runtime_error);
    CHECK_THROWS_AS(read_conllu(dir / "missing.conllu"), std::runtime_error);
}

TEST_CASE("baseline: synthetic all at -1") {
    std::vector<DependencyInstance> corpus;
    for (int i = 0; i < 3; ++i) {
        DependencyInstance inst;
        inst.words = {"the", "dog", "runs"};
        inst.dependent = 1;
        inst.governor = 2;
        inst.relation = "nsubj";
        corpus.push_back(inst);
    }
    const auto baseline = compute_baseline(corpus, "nsubj");
    CHECK(baseline.modal_offset == -1);
    CHECK(baseline.proportion == 1.0);
    CHECK(baseline.n_instances == 3);
    CHECK_THROWS_AS(compute_baseline(corpus, "obj"), std::runtime_error);
}

TEST_CASE("baseline ties break toward the smaller absolute offset") {
    std::vector<DependencyInstance> corpus;
    auto add = [&](int dep, int gov) {
        DependencyInstance inst;
        inst.words = {"a", "b", "c", "d", "e"};
        inst.dependent = dep;
        inst.governor = gov;
        inst.relation = "r";
        corpus.push_back(inst);
    };
    add(1, 4);  // -3
    add(0, 3);  // -3
    add(2, 3);  // -1
    add(1, 2);  // -1
    const auto baseline = compute_baseline(corpus, "r");
    CHECK(baseline.modal_offset == -1);
    CHECK(baseline.proportion == 0.5);
}

TEST_CASE("nsubj fixture reproduces the 42% baseline") {
    const auto corpus = read_conllu(data_root() / "tests" / "data" / "corpus" / "baseline_nsubj.conllu");
    const auto baseline = compute_baseline(corpus, "nsubj");
    CHECK(baseline.modal_offset == -1);
    CHECK(baseline.n_instances == 50);
    CHECK(baseline.proportion == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("reflexive fixture reproduces the 22% baseline") {
    const auto corpus =
        read_reflexive_jsonl(data_root() / "tests" / "data" / "corpus" / "baseline_reflexive.jsonl");
    CHECK(corpus.size() == 50);
    const auto baseline = compute_baseline(corpus, kReflexiveRelation);
    CHECK(baseline.modal_offset == -2);
    CHECK(baseline.proportion == doctest::Approx(0.22).epsilon(1e-12));
}

TEST_CASE("specialization thresholds anchor to the published arithmetic") {
    CHECK(1.1 * 0.22 == doctest::Approx(0.242).epsilon(1e-12));
    CHECK(1.1 * 0.42 == doctest::Approx(0.462).epsilon(1e-12));
}

TEST_CASE("planted head scores 0.9 on the fixture corpus") {
    const auto corpus =
        read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    const auto score =
        head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {2, 5});
    CHECK(score.n_instances == 10);
    CHECK(score.hits == 9);
    CHECK(score.accuracy == 0.9);
}

TEST_CASE("a head that always one-hots the dependent scores 1.0") {
    auto corpus = read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    // drop the one sentence where the marker is not the labelled dependent
    corpus.erase(std::remove_if(corpus.begin(), corpus.end(),
                                [](const DependencyInstance& inst) {
                                    return inst.words[static_cast<std::size_t>(inst.dependent)] !=
                                           "dog";
                                }),
                 corpus.end());
    REQUIRE(corpus.size() == 9);
    const auto score = head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {2, 5});
    CHECK(score.accuracy == 1.0);
    CHECK(score.hits == 9);
}

TEST_CASE("find_specialized returns exactly the planted head") {
    const auto corpus =
        read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    const auto result = find_specialized(planted_model(), gpt2_tokenizer(), corpus, "nsubj");

    CHECK(result.baseline.modal_offset == -1);
    CHECK(result.baseline.proportion == 0.5);
    CHECK(result.threshold == doctest::Approx(0.55).epsilon(1e-12));

    REQUIRE(result.specialized.size() == 1);
    CHECK(result.specialized[0].layer == 2);
    CHECK(result.specialized[0].head == 5);
    CHECK(result.specialized[0].accuracy == 0.9);

    // the returned set is exactly the brute-force filter of the full table
    std::size_t over = 0;
    for (const auto& s : result.all) {
        if (s.accuracy >= result.threshold) ++over;
    }
    CHECK(over == result.specialized.size());
    CHECK(result.all.size() == 18);  // 3 layers x 6 heads
}

TEST_CASE("accuracy is invariant under corpus reordering") {
    auto corpus = read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    const auto before = head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {2, 5});
    std::mt19937 rng(3);
    std::shuffle(corpus.begin(), corpus.end(), rng);
    const auto after = head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {2, 5});
    CHECK(before.accuracy == after.accuracy);
    CHECK(before.hits == after.hits);
}

TEST_CASE("word-level argmax agrees on single-token dependents") {
    const auto corpus =
        read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    HeadSearchOptions options;
    options.word_level_argmax = true;
    const auto word_level =
        head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {2, 5}, options);
    // every fixture word is one token, so the two argmax domains coincide
    CHECK(word_level.accuracy == 0.9);
}

TEST_CASE("worker count does not change scores") {
    const auto corpus =
        read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    HeadSearchOptions options;
    options.workers = 4;
    const auto parallel =
        score_all_heads(planted_model(), gpt2_tokenizer(), corpus, "nsubj", options);
    const auto serial = score_all_heads(planted_model(), gpt2_tokenizer(), corpus, "nsubj");
    CHECK(parallel.hits == serial.hits);
    CHECK(parallel.n_instances == serial.n_instances);
}

TEST_CASE("planted reflexive corpus recovers the same head") {
    const auto corpus =
        read_reflexive_jsonl(data_root() / "tests" / "data" / "corpus" / "planted_reflexive.jsonl");
    const auto result =
        find_specialized(planted_model(), gpt2_tokenizer(), corpus, kReflexiveRelation);
    REQUIRE(!result.specialized.empty());
    CHECK(result.specialized[0].layer == 2);
    CHECK(result.specialized[0].head == 5);
    CHECK(result.specialized[0].accuracy == 0.8);
}

TEST_CASE("overlong sentences are skipped and counted") {
    std::vector<DependencyInstance> corpus;
    DependencyInstance ok;
    ok.words = {"The", "dog", "waits", "."};
    ok.dependent = 1;
    ok.governor = 2;
    ok.relation = "nsubj";
    corpus.push_back(ok);

    DependencyInstance longone = ok;
    longone.words.clear();
    longone.words.push_back("The");
    longone.words.push_back("dog");
    longone.words.push_back("waits");
    for (int i = 0; i < 70; ++i) longone.words.push_back("really");  // past ctx 64
    corpus.push_back(longone);

    const auto table = score_all_heads(planted_model(), gpt2_tokenizer(), corpus, "nsubj");
    CHECK(table.n_instances == 1);
    CHECK(table.n_skipped == 1);
}

TEST_CASE("head_accuracy validates the head index") {
    const auto corpus =
        read_conllu(data_root() / "tests" / "data" / "corpus" / "planted_nsubj.conllu");
    CHECK_THROWS_AS(
        head_accuracy(planted_model(), gpt2_tokenizer(), corpus, "nsubj", {7, 0}),
        std::out_of_range);
}

TEST_CASE("reflexive reader validates indices") {
    const auto dir = scratch_dir("refl");
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"text": "a b c", "antecedent_word_index": 5, "anaphor_word_index": 1})" << "\n";
    }
    CHECK_THROWS_AS(read_reflexive_jsonl(dir / "bad.jsonl"), std::runtime_error);
    {
        std::ofstream out(dir / "bad2.jsonl");
        out << R"({"text": "a b c"})" << "\n";
    }
    CHECK_THROWS_AS(read_reflexive_jsonl(dir / "bad2.jsonl"), std::runtime_error);
}
