// lmprobe: run a GPT-2-class checkpoint over psycholinguistic materials and
// emit surprisal, attention-entropy, and attention-to-target analyses as
// reproducible CSV/JSON files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lmprobe/corpus_counter.hpp"
#include "lmprobe/experiment.hpp"
#include "lmprobe/headfinder.hpp"
#include "lmprobe/kernels.hpp"
#include "lmprobe/metrics.hpp"
#include "lmprobe/model.hpp"
#include "lmprobe/output.hpp"
#include "lmprobe/parallel.hpp"
#include "lmprobe/stats.hpp"
#include "lmprobe/tokenizer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalArgs {
    std::string checkpoint;
    std::string config_path;
    std::string vocab;
    std::string merges;
    std::string out_dir = ".";
    std::string kernels = "auto";
    int workers = 1;
    int layer = -1;  // -1: use the per-mode default
    int head = -1;
};

struct ModelBundle {
    lmprobe::ModelConfig config;
    lmprobe::Model model;
    lmprobe::Tokenizer tokenizer;
};

ModelBundle load_bundle(const GlobalArgs& args) {
    if (args.checkpoint.empty()) throw std::runtime_error("--checkpoint is required");
    if (args.vocab.empty() || args.merges.empty()) {
        throw std::runtime_error("--vocab and --merges are required");
    }
    lmprobe::ModelConfig config;
    if (!args.config_path.empty()) {
        config = lmprobe::ModelConfig::from_json_file(args.config_path);
    }
    return {config, lmprobe::Model::load_checkpoint(args.checkpoint, config),
            lmprobe::Tokenizer::load(args.vocab, args.merges)};
}

json config_json(const lmprobe::ModelConfig& c) {
    return {{"n_layer", c.n_layers},       {"n_head", c.n_heads},
            {"n_embd", c.d_model},         {"vocab_size", c.vocab_size},
            {"n_positions", c.max_context}, {"layer_norm_epsilon", c.layer_norm_epsilon}};
}

lmprobe::RunManifest base_manifest(const std::string& command, const GlobalArgs& args) {
    lmprobe::RunManifest m;
    m.command = command;
    m.flags["workers"] = args.workers;
    m.flags["kernels"] = std::string(lmprobe::kern::active_kernels().name);
    m.flags["out_dir"] = args.out_dir;
    if (!args.checkpoint.empty()) {
        m.checkpoint_path = args.checkpoint;
        m.checkpoint_sha256 = lmprobe::sha256_file(args.checkpoint);
    }
    if (!args.vocab.empty()) m.input_digests.push_back({args.vocab, lmprobe::sha256_file(args.vocab)});
    if (!args.merges.empty()) m.input_digests.push_back({args.merges, lmprobe::sha256_file(args.merges)});
    return m;
}

lmprobe::HeadRef resolve_head(const GlobalArgs& args, const lmprobe::ModelConfig& config,
                              lmprobe::HeadRef fallback) {
    lmprobe::HeadRef head = fallback;
    if (args.layer >= 0) head.layer = args.layer;
    if (args.head >= 0) head.head = args.head;
    if (head.layer >= config.n_layers || head.head >= config.n_heads) {
        throw std::runtime_error(fmt::format("head {}/{} outside model of {} layers x {} heads",
                                             head.layer, head.head, config.n_layers, config.n_heads));
    }
    return head;
}

fs::path prepare_out_dir(const GlobalArgs& args) {
    fs::path dir(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// surprisal
// ---------------------------------------------------------------------------

struct SurprisalArgs {
    std::vector<std::string> texts;
    std::string input_file;
};

void cmd_surprisal(const GlobalArgs& gargs, const SurprisalArgs& args) {
    std::vector<std::string> sentences = args.texts;
    if (!args.input_file.empty()) {
        std::ifstream in(args.input_file);
        if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", args.input_file));
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) sentences.push_back(line);
        }
    }
    if (sentences.empty()) {
        throw std::runtime_error("no input: pass --text or --input");
    }

    ModelBundle bundle = load_bundle(gargs);
    const fs::path dir = prepare_out_dir(gargs);

    struct Row {
        std::size_t sentence, word_index;
        std::string word;
        lmprobe::TokenRange tokens;
        std::optional<double> surprisal;
    };
    std::vector<std::vector<Row>> rows(sentences.size());

    lmprobe::parallel_for(sentences.size(), gargs.workers, [&](std::size_t s) {
        const std::string& text = sentences[s];
        const auto spans = bundle.tokenizer.encode(text);
        if (spans.empty()) throw std::runtime_error(fmt::format("sentence {} is empty", s));
        const auto trace = bundle.model.forward(lmprobe::Tokenizer::ids(spans));

        // whitespace-delimited words
        std::size_t pos = 0, word_index = 0;
        while (pos < text.size()) {
            while (pos < text.size() && text[pos] == ' ') ++pos;
            if (pos >= text.size()) break;
            std::size_t end = text.find(' ', pos);
            if (end == std::string::npos) end = text.size();
            const auto range = lmprobe::locate_span(spans, pos, end);
            Row row{s, word_index, text.substr(pos, end - pos), range, std::nullopt};
            if (range.first > 0) {
                row.surprisal = lmprobe::surprisal_bits(trace, range);
            }
            rows[s].push_back(std::move(row));
            ++word_index;
            pos = end;
        }
    });

    lmprobe::CsvWriter csv(dir / "surprisal.csv",
                           {"sentence_index", "word_index", "word", "token_first", "token_last",
                            "surprisal_bits"});
    for (const auto& sentence_rows : rows) {
        for (const Row& r : sentence_rows) {
            csv.row({std::to_string(r.sentence), std::to_string(r.word_index), r.word,
                     std::to_string(r.tokens.first), std::to_string(r.tokens.last),
                     r.surprisal ? lmprobe::csv_number(*r.surprisal) : ""});
        }
    }

    lmprobe::RunManifest manifest = base_manifest("surprisal", gargs);
    manifest.config_echo = config_json(bundle.config);
    if (!args.input_file.empty()) {
        manifest.input_digests.push_back({args.input_file, lmprobe::sha256_file(args.input_file)});
    }
    manifest.extra["n_sentences"] = sentences.size();
    manifest.write(dir / "surprisal_manifest.json");
}

// ---------------------------------------------------------------------------
// find-heads
// ---------------------------------------------------------------------------

struct FindHeadsArgs {
    std::string conllu;
    std::string reflexive;
    std::string relation = "nsubj";
    std::string anchor = "last";
    std::string argmax_level = "subtoken";
    bool include_self = false;
    bool skip_punct = false;
};

void cmd_find_heads(const GlobalArgs& gargs, const FindHeadsArgs& args) {
    if (args.conllu.empty() == args.reflexive.empty()) {
        throw std::runtime_error("pass exactly one of --conllu or --reflexive");
    }
    ModelBundle bundle = load_bundle(gargs);
    const fs::path dir = prepare_out_dir(gargs);

    std::vector<lmprobe::DependencyInstance> corpus;
    std::string relation;
    std::string input_path;
    if (!args.conllu.empty()) {
        corpus = lmprobe::read_conllu(args.conllu);
        relation = args.relation;
        input_path = args.conllu;
    } else {
        corpus = lmprobe::read_reflexive_jsonl(args.reflexive);
        relation = lmprobe::kReflexiveRelation;
        input_path = args.reflexive;
    }

    lmprobe::HeadSearchOptions options;
    options.anchor_last_subtoken = args.anchor != "first";
    options.include_self = args.include_self;
    options.skip_punct_offsets = args.skip_punct;
    options.word_level_argmax = args.argmax_level == "word";
    options.workers = gargs.workers;

    const auto result = lmprobe::find_specialized(bundle.model, bundle.tokenizer, corpus,
                                                  relation, options);

    const std::vector<std::string> header = {"layer", "head", "relation", "accuracy",
                                             "hits", "n_instances"};
    auto write_scores = [&](const fs::path& path, const std::vector<lmprobe::HeadScore>& scores) {
        lmprobe::CsvWriter csv(path, header);
        for (const auto& s : scores) {
            csv.row({std::to_string(s.layer), std::to_string(s.head), s.relation,
                     lmprobe::csv_number(s.accuracy), std::to_string(s.hits),
                     std::to_string(s.n_instances)});
        }
    };
    write_scores(dir / "head_scores.csv", result.specialized);
    write_scores(dir / "head_scores_all.csv", result.all);

    lmprobe::RunManifest manifest = base_manifest("find-heads", gargs);
    manifest.config_echo = config_json(bundle.config);
    manifest.input_digests.push_back({input_path, lmprobe::sha256_file(input_path)});
    manifest.flags["relation"] = relation;
    manifest.flags["anchor"] = args.anchor;
    manifest.flags["argmax_level"] = args.argmax_level;
    manifest.flags["include_self"] = args.include_self;
    manifest.flags["skip_punct"] = args.skip_punct;
    manifest.extra["baseline"] = {{"relation", result.baseline.relation},
                                  {"modal_offset", result.baseline.modal_offset},
                                  {"proportion", result.baseline.proportion},
                                  {"n_instances", result.baseline.n_instances}};
    manifest.extra["threshold"] = result.threshold;
    manifest.extra["skipped_sentences"] = result.n_skipped;
    manifest.extra["n_specialized"] = result.specialized.size();
    manifest.write(dir / "find_heads_manifest.json");
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentArgs {
    std::string stimuli;
    std::string mode = "subject-verb";  // picks the default head
    std::string anchor = "first";
    int spillover_words = 0;
};

void cmd_experiment(const GlobalArgs& gargs, const ExperimentArgs& args) {
    if (args.stimuli.empty()) throw std::runtime_error("--stimuli is required");
    ModelBundle bundle = load_bundle(gargs);
    const fs::path dir = prepare_out_dir(gargs);

    const lmprobe::HeadRef default_head =
        args.mode == "reflexive" ? lmprobe::HeadRef{1, 5} : lmprobe::HeadRef{4, 3};
    const lmprobe::HeadRef head = resolve_head(gargs, bundle.config, default_head);

    const auto items = lmprobe::load_stimuli(args.stimuli);
    if (items.empty()) throw std::runtime_error(fmt::format("stimulus file '{}' is empty", args.stimuli));

    lmprobe::ExperimentOptions options;
    options.anchor_last_subtoken = args.anchor == "last";
    options.spillover_words = args.spillover_words;
    options.workers = gargs.workers;

    const auto records = lmprobe::run_experiment(bundle.model, bundle.tokenizer, items, head, options);

    {
        lmprobe::CsvWriter csv(dir / "items.csv",
                               {"item_id", "set_id", "grammaticality", "interference",
                                "subject_number", "layer", "head", "n_tokens", "anchor_position",
                                "critical_token_first", "critical_token_last", "surprisal_bits",
                                "attention_entropy_bits", "attention_to_target"});
        for (const auto& r : records) {
            csv.row({r.item_id, r.set_id, r.grammaticality, r.interference, r.subject_number,
                     std::to_string(r.head.layer), std::to_string(r.head.head),
                     std::to_string(r.n_tokens), std::to_string(r.anchor_position),
                     std::to_string(r.critical_tokens.first), std::to_string(r.critical_tokens.last),
                     lmprobe::csv_number(r.surprisal_bits),
                     lmprobe::csv_number(r.attention_entropy_bits),
                     r.attention_to_target ? lmprobe::csv_number(*r.attention_to_target) : ""});
        }
    }

    json plot = json::object();
    {
        lmprobe::CsvWriter csv(dir / "summary.csv",
                               {"metric", "grammaticality", "interference", "subject_number", "n",
                                "mean", "sd", "se", "ci95_low", "ci95_high"});
        for (const char* metric : lmprobe::kMetricNames) {
            const auto summaries = lmprobe::summarize(records, metric);
            for (const auto& s : summaries) {
                csv.row({metric, s.grammaticality, s.interference, s.subject_number,
                         std::to_string(s.stats.n), lmprobe::csv_number(s.stats.mean),
                         lmprobe::csv_number(s.stats.sd), lmprobe::csv_number(s.stats.se),
                         lmprobe::csv_number(s.stats.ci95_low),
                         lmprobe::csv_number(s.stats.ci95_high)});

                std::string key = s.grammaticality + "/" + s.interference;
                if (!s.subject_number.empty()) key += "/" + s.subject_number;
                json points = json::array();
                for (const auto& r : records) {
                    if (r.grammaticality == s.grammaticality && r.interference == s.interference &&
                        r.subject_number == s.subject_number && lmprobe::metric_defined(r, metric)) {
                        points.push_back(lmprobe::metric_value(r, metric));
                    }
                }
                json entry = {{"points", points}, {"n", s.stats.n}, {"mean", s.stats.mean}};
                if (s.stats.ci_defined) {
                    entry["ci95_low"] = s.stats.ci95_low;
                    entry["ci95_high"] = s.stats.ci95_high;
                } else {
                    entry["ci95_low"] = nullptr;
                    entry["ci95_high"] = nullptr;
                }
                plot[metric][key] = entry;
            }
        }
    }

    {
        lmprobe::CsvWriter csv(dir / "effects.csv",
                               {"metric", "grammaticality", "subject_number", "n_pairs",
                                "effect_int_minus_nonint", "ci95_low", "ci95_high"});
        for (const char* metric : lmprobe::kMetricNames) {
            for (const auto& e : lmprobe::interference_effects(records, metric)) {
                csv.row({metric, e.grammaticality, e.subject_number, std::to_string(e.n_pairs),
                         lmprobe::csv_number(e.effect),
                         e.ci_defined ? lmprobe::csv_number(e.ci95_low) : "",
                         e.ci_defined ? lmprobe::csv_number(e.ci95_high) : ""});
            }
        }
    }

    {
        std::ofstream out(dir / "plot_data.json", std::ios::binary);
        out << plot.dump(2) << "\n";
    }

    lmprobe::RunManifest manifest = base_manifest("experiment", gargs);
    manifest.config_echo = config_json(bundle.config);
    manifest.input_digests.push_back({args.stimuli, lmprobe::sha256_file(args.stimuli)});
    manifest.flags["mode"] = args.mode;
    manifest.flags["anchor"] = args.anchor;
    manifest.flags["spillover_words"] = args.spillover_words;
    manifest.extra["head"] = {{"layer", head.layer}, {"head", head.head}};
    manifest.extra["n_items"] = records.size();
    manifest.write(dir / "experiment_manifest.json");
}

// ---------------------------------------------------------------------------
// count-corpus
// ---------------------------------------------------------------------------

void cmd_count_corpus(const GlobalArgs& gargs, const std::string& input) {
    if (input.empty()) throw std::runtime_error("--input is required");
    const fs::path dir = prepare_out_dir(gargs);

    const auto sentences = lmprobe::read_agreement_jsonl(input);
    const auto counts = lmprobe::count_patterns(sentences);

    lmprobe::CsvWriter csv(dir / "agreement_counts.csv",
                           {"subject_number", "interfering", "non_interfering",
                            "ratio_int_to_nonint"});
    csv.row({"sg", std::to_string(counts.sg_interfering()),
             std::to_string(counts.sg_non_interfering()), lmprobe::csv_number(counts.ratio("sg"))});
    csv.row({"pl", std::to_string(counts.pl_interfering()),
             std::to_string(counts.pl_non_interfering()), lmprobe::csv_number(counts.ratio("pl"))});

    lmprobe::RunManifest manifest = base_manifest("count-corpus", gargs);
    manifest.input_digests.push_back({input, lmprobe::sha256_file(input)});
    manifest.extra["excluded_no_distractor"] = counts.excluded;
    manifest.extra["total_counted"] = counts.total_counted();
    manifest.extra["multi_distractor_policy"] = "interfering-if-any-distractor-matches-verb";
    manifest.write(dir / "count_corpus_manifest.json");
}

// ---------------------------------------------------------------------------
// dump-attention
// ---------------------------------------------------------------------------

void cmd_dump_attention(const GlobalArgs& gargs, const std::string& text) {
    if (text.empty()) throw std::runtime_error("--text is required");
    ModelBundle bundle = load_bundle(gargs);
    const fs::path dir = prepare_out_dir(gargs);

    const auto spans = bundle.tokenizer.encode(text);
    if (spans.empty()) throw std::runtime_error("input text is empty");
    const auto trace = bundle.model.forward(lmprobe::Tokenizer::ids(spans));

    json doc;
    doc["text"] = text;
    auto tokens = json::array();
    for (const auto& s : spans) {
        tokens.push_back({{"id", s.token_id},
                          {"text", bundle.tokenizer.decode(std::vector<int>{s.token_id})},
                          {"byte_start", s.byte_start},
                          {"byte_end", s.byte_end}});
    }
    doc["tokens"] = tokens;
    doc["n_layers"] = trace.n_layers;
    doc["n_heads"] = trace.n_heads;

    auto layers = json::array();
    for (int l = 0; l < trace.n_layers; ++l) {
        auto heads = json::array();
        for (int h = 0; h < trace.n_heads; ++h) {
            auto matrix = json::array();
            for (int i = 0; i < trace.n_tokens; ++i) {
                auto row = trace.attention_row(l, h, i);
                matrix.push_back(json(std::vector<float>(row.begin(), row.end())));
            }
            heads.push_back(std::move(matrix));
        }
        layers.push_back(std::move(heads));
    }
    doc["attentions"] = layers;

    std::ofstream out(dir / "attention.json", std::ios::binary);
    out << doc.dump() << "\n";

    lmprobe::RunManifest manifest = base_manifest("dump-attention", gargs);
    manifest.config_echo = config_json(bundle.config);
    manifest.extra["n_tokens"] = trace.n_tokens;
    manifest.write(dir / "dump_attention_manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GPT-2 psycholinguistic analysis toolkit"};
    app.require_subcommand(1);

    GlobalArgs gargs;
    app.add_option("--checkpoint", gargs.checkpoint, "model checkpoint (.safetensors)");
    app.add_option("--config", gargs.config_path, "model config JSON (default: GPT-2 124M shape)");
    app.add_option("--vocab", gargs.vocab, "vocabulary JSON");
    app.add_option("--merges", gargs.merges, "BPE merges file");
    app.add_option("--out-dir", gargs.out_dir, "directory for result files");
    app.add_option("--workers", gargs.workers, "parallel workers over items/sentences")
        ->check(CLI::PositiveNumber);
    app.add_option("--layer", gargs.layer, "attention layer index");
    app.add_option("--head", gargs.head, "attention head index");
    app.add_option("--kernels", gargs.kernels, "compute kernels: auto|scalar|avx2|neon");

    SurprisalArgs sargs;
    auto* surprisal = app.add_subcommand("surprisal", "per-word surprisal table");
    surprisal->add_option("--text", sargs.texts, "sentence to score (repeatable)");
    surprisal->add_option("--input", sargs.input_file, "file with one sentence per line");

    FindHeadsArgs fargs;
    auto* find_heads = app.add_subcommand("find-heads", "specialized attention-head search");
    find_heads->add_option("--conllu", fargs.conllu, "CoNLL-U dependency corpus");
    find_heads->add_option("--reflexive", fargs.reflexive, "reflexive-antecedent JSON-lines corpus");
    find_heads->add_option("--relation", fargs.relation, "dependency relation (with --conllu)");
    find_heads->add_option("--anchor", fargs.anchor, "governor anchor subtoken: last|first")
        ->check(CLI::IsMember({"last", "first"}));
    find_heads->add_option("--argmax-level", fargs.argmax_level,
                           "argmax over subtoken positions or per-word attention mass")
        ->check(CLI::IsMember({"subtoken", "word"}));
    find_heads->add_flag("--include-self", fargs.include_self,
                         "let the argmax include the anchor position");
    find_heads->add_flag("--skip-punct", fargs.skip_punct,
                         "count relative offsets over non-punctuation words");

    ExperimentArgs eargs;
    auto* experiment = app.add_subcommand("experiment", "factorial agreement-interference run");
    experiment->add_option("--stimuli", eargs.stimuli, "stimulus JSON-lines file");
    experiment->add_option("--mode", eargs.mode, "subject-verb (head 4/3) or reflexive (head 1/5)")
        ->check(CLI::IsMember({"subject-verb", "reflexive"}));
    experiment->add_option("--anchor", eargs.anchor, "critical-word anchor subtoken: first|last")
        ->check(CLI::IsMember({"first", "last"}));
    experiment->add_option("--spillover-words", eargs.spillover_words,
                           "extend the critical region by N following words")
        ->check(CLI::NonNegativeNumber);

    std::string count_input;
    auto* count = app.add_subcommand("count-corpus", "2x2 agreement-attraction counts");
    count->add_option("--input", count_input, "annotated agreement JSON-lines file");

    std::string attention_text;
    auto* dump = app.add_subcommand("dump-attention", "raw attention matrices for plotting");
    dump->add_option("--text", attention_text, "sentence to trace");

    CLI11_PARSE(app, argc, argv);

    try {
        lmprobe::kern::force_kernels(gargs.kernels.c_str());
        if (surprisal->parsed()) {
            cmd_surprisal(gargs, sargs);
        } else if (find_heads->parsed()) {
            cmd_find_heads(gargs, fargs);
        } else if (experiment->parsed()) {
            cmd_experiment(gargs, eargs);
        } else if (count->parsed()) {
            cmd_count_corpus(gargs, count_input);
        } else if (dump->parsed()) {
            cmd_dump_attention(gargs, attention_text);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
