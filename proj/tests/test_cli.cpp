#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmprobe/tokenizer.hpp"
#include "support/test_support.hpp"

using namespace lmprobe::testing;
namespace fs = std::filesystem;

namespace {

std::string tool_path() {
    const char* env = std::getenv("LMPROBE_BIN");
    REQUIRE_MESSAGE(env != nullptr, "LMPROBE_BIN must point at the lmprobe binary");
    return env;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = tool_path() + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in, "missing file: ", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string model_flags() {
    const auto root = data_root();
    return " --checkpoint " + (root / "tests/data/ref_small/model.safetensors").string() +
           " --config " + (root / "tests/data/ref_small/config.json").string() +
           " --vocab " + (root / "assets/gpt2-vocab/vocab.json").string() +
           " --merges " + (root / "assets/gpt2-vocab/merges.txt").string();
}

std::string sorted_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace

TEST_CASE("surprisal command writes a per-word table") {
    const auto dir = scratch_dir("cli");
    const int rc = run(model_flags() + " --out-dir " + dir.string() +
                           " surprisal --text \"The slogan on the posters were designed to get attention.\"",
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));

    const std::string csv = slurp(dir / "surprisal.csv");
    CHECK(csv.find("sentence_index,word_index,word,token_first,token_last,surprisal_bits") == 0);
    // first word has no left context: empty surprisal cell
    CHECK(csv.find("0,0,The,0,1,\n") != std::string::npos);
    CHECK(csv.find(",were,") != std::string::npos);

    const auto manifest = nlohmann::json::parse(slurp(dir / "surprisal_manifest.json"));
    CHECK(manifest.at("command") == "surprisal");
    CHECK(manifest.at("checkpoint").at("sha256").get<std::string>().size() == 64);
}

TEST_CASE("surprisal over a sentence file emits one block per line") {
    const auto dir = scratch_dir("cli");
    {
        std::ofstream out(dir / "sentences.txt");
        out << "The key to the cabinets was rusty.\n";
        out << "A quick brown fox jumps over the lazy dog.\n";
    }
    const int rc = run(model_flags() + " --out-dir " + dir.string() + " surprisal --input " +
                           (dir / "sentences.txt").string(),
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));
    const std::string csv = slurp(dir / "surprisal.csv");
    CHECK(csv.find("\n0,0,The,") != std::string::npos);
    CHECK(csv.find("\n1,0,A,") != std::string::npos);
    CHECK(csv.find(",fox,") != std::string::npos);
}

TEST_CASE("experiment command emits items, summaries, effects, and plot data") {
    const auto dir = scratch_dir("cli");
    const auto stimuli = data_root() / "data/stimuli/wagers09_exp46_example.jsonl";
    const int rc = run(model_flags() + " --out-dir " + dir.string() + " experiment --stimuli " +
                           stimuli.string(),
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));

    const std::string items = slurp(dir / "items.csv");
    CHECK(std::count(items.begin(), items.end(), '\n') == 5);  // header + 4 items
    CHECK(items.find("w46_ungram_int") != std::string::npos);

    const std::string summary = slurp(dir / "summary.csv");
    CHECK(summary.find("surprisal,") != std::string::npos);
    CHECK(summary.find("attention_entropy,") != std::string::npos);

    const auto plot = nlohmann::json::parse(slurp(dir / "plot_data.json"));
    CHECK(plot.contains("surprisal"));
    CHECK(plot.at("surprisal").contains("ungram/int/sg"));

    const auto manifest = nlohmann::json::parse(slurp(dir / "experiment_manifest.json"));
    CHECK(manifest.at("head").at("layer") == 4);
    CHECK(manifest.at("head").at("head") == 3);
}

TEST_CASE("reflexive mode defaults to head 1/5") {
    const auto dir = scratch_dir("cli");
    const auto stimuli = data_root() / "data/stimuli/dillon13_reflexive_example.jsonl";
    const int rc = run(model_flags() + " --out-dir " + dir.string() + " experiment --stimuli " +
                           stimuli.string() + " --mode reflexive",
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "experiment_manifest.json"));
    CHECK(manifest.at("head").at("layer") == 1);
    CHECK(manifest.at("head").at("head") == 5);
}

TEST_CASE("find-heads reports the planted head and the threshold in the manifest") {
    const auto dir = scratch_dir("cli");

    // build the planted checkpoint next to the outputs
    const lmprobe::ModelConfig config = planted_config();
    {
        const auto spans = lmprobe::Tokenizer::load(data_root() / "assets/gpt2-vocab/vocab.json",
                                                    data_root() / "assets/gpt2-vocab/merges.txt")
                               .encode(" dog");
        write_safetensors(dir / "planted.safetensors",
                          planted_checkpoint_tensors(config, spans[0].token_id, {2, 5}));
        std::ofstream cfg(dir / "config.json");
        cfg << R"({"n_layer": 3, "n_head": 6, "n_embd": 24, "vocab_size": 50257, "n_positions": 64})";
    }

    const std::string flags = " --checkpoint " + (dir / "planted.safetensors").string() +
                              " --config " + (dir / "config.json").string() +
                              " --vocab " + (data_root() / "assets/gpt2-vocab/vocab.json").string() +
                              " --merges " + (data_root() / "assets/gpt2-vocab/merges.txt").string();

    const int rc = run(flags + " --out-dir " + dir.string() + " find-heads --conllu " +
                           (data_root() / "tests/data/corpus/planted_nsubj.conllu").string(),
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));

    const std::string scores = slurp(dir / "head_scores.csv");
    CHECK(scores.find("2,5,nsubj,0.9,9,10") != std::string::npos);

    // reflexive path: baseline 0.22 fixture pins the 0.242 threshold
    const int rc2 = run(flags + " --out-dir " + dir.string() + " find-heads --reflexive " +
                            (data_root() / "tests/data/corpus/baseline_reflexive.jsonl").string(),
                        dir / "log2.txt");
    REQUIRE_MESSAGE(rc2 == 0, slurp(dir / "log2.txt"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "find_heads_manifest.json"));
    CHECK(manifest.at("baseline").at("proportion").get<double>() == doctest::Approx(0.22));
    CHECK(manifest.at("threshold").get<double>() == doctest::Approx(0.242).epsilon(1e-9));
}

TEST_CASE("count-corpus reproduces the published table shape") {
    const auto dir = scratch_dir("cli");
    const int rc = run("--out-dir " + dir.string() + " count-corpus --input " +
                           (data_root() / "tests/data/corpus/table3_shape.jsonl").string(),
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));
    const std::string csv = slurp(dir / "agreement_counts.csv");
    CHECK(csv.find("sg,80,39,2.05") != std::string::npos);
    CHECK(csv.find("pl,71,51,1.39") != std::string::npos);
}

TEST_CASE("dump-attention writes row-stochastic matrices") {
    const auto dir = scratch_dir("cli");
    const int rc = run(model_flags() + " --out-dir " + dir.string() +
                           " dump-attention --text \"The slogan on the posters\"",
                       dir / "log.txt");
    REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));
    const auto doc = nlohmann::json::parse(slurp(dir / "attention.json"));
    CHECK(doc.at("n_layers") == 6);
    const auto& matrix = doc.at("attentions")[0][0];
    double sum = 0.0;
    for (const auto& v : matrix[1]) sum += v.get<double>();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("identical runs are byte-identical; workers only reorder nothing") {
    const auto dir1 = scratch_dir("cli");
    const auto dir2 = scratch_dir("cli");
    const auto dir4 = scratch_dir("cli");
    const auto stimuli = data_root() / "data/stimuli/wagers09_exp46_example.jsonl";
    for (const auto& [dir, workers] :
         {std::pair{dir1, 1}, std::pair{dir2, 1}, std::pair{dir4, 4}}) {
        const int rc = run(model_flags() + " --workers " + std::to_string(workers) + " --out-dir " +
                               dir.string() + " experiment --stimuli " + stimuli.string(),
                           dir / "log.txt");
        REQUIRE_MESSAGE(rc == 0, slurp(dir / "log.txt"));
    }
    for (const char* name : {"items.csv", "summary.csv", "effects.csv"}) {
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));
        CHECK(sorted_lines(slurp(dir1 / name)) == sorted_lines(slurp(dir4 / name)));
    }
}

TEST_CASE("failures produce a nonzero exit and a single-line diagnostic") {
    const auto dir = scratch_dir("cli");

    // no such stimulus file
    int rc = run(model_flags() + " --out-dir " + dir.string() + " experiment --stimuli /nonexistent.jsonl",
                 dir / "log.txt");
    CHECK(rc == 1);
    std::string log = slurp(dir / "log.txt");
    CHECK(log.rfind("error: ", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);

    // empty stimulus file
    { std::ofstream out(dir / "empty.jsonl"); }
    rc = run(model_flags() + " --out-dir " + dir.string() + " experiment --stimuli " +
                 (dir / "empty.jsonl").string(),
             dir / "log.txt");
    CHECK(rc == 1);
    CHECK(slurp(dir / "log.txt").rfind("error: ", 0) == 0);

    // missing model flags
    rc = run("--out-dir " + dir.string() + " surprisal --text hi", dir / "log.txt");
    CHECK(rc == 1);
}
