#include "lmprobe/headfinder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lmprobe/parallel.hpp"

namespace lmprobe {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(start));
            break;
        }
        cols.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return cols;
}

struct ConlluWord {
    std::string form;
    bool punct = false;
    int head = 0;  // 1-based, 0 = root
    std::string deprel;
};

void flush_sentence(std::vector<ConlluWord>& sent, std::vector<DependencyInstance>& out) {
    if (sent.empty()) return;
    std::vector<std::string> words;
    std::vector<std::uint8_t> punct;
    words.reserve(sent.size());
    for (const ConlluWord& w : sent) {
        words.push_back(w.form);
        punct.push_back(w.punct ? 1 : 0);
    }
    for (std::size_t i = 0; i < sent.size(); ++i) {
        const ConlluWord& w = sent[i];
        if (w.head <= 0) continue;  // root or headless
        const int gov = w.head - 1;
        if (gov == static_cast<int>(i) || gov >= static_cast<int>(sent.size())) continue;
        DependencyInstance inst;
        inst.words = words;
        inst.is_punct = punct;
        inst.dependent = static_cast<int>(i);
        inst.governor = gov;
        inst.relation = w.deprel;
        out.push_back(std::move(inst));
    }
    sent.clear();
}

std::string join_words(std::span<const std::string> words, std::vector<std::size_t>* starts) {
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) text += ' ';
        if (starts) starts->push_back(text.size());
        text += words[i];
    }
    return text;
}

}  // namespace

std::vector<DependencyInstance> read_conllu(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open dependency corpus '{}'", path.string()));
    }
    std::vector<DependencyInstance> out;
    std::vector<ConlluWord> sent;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush_sentence(sent, out);
            continue;
        }
        if (line[0] == '#') continue;
        const auto cols = split_tabs(line);
        if (cols.size() != 10) {
            throw std::runtime_error(fmt::format(
                "'{}' line {}: expected 10 tab-separated columns, found {}",
                path.string(), line_no, cols.size()));
        }
        const std::string& id = cols[0];
        // multiword-token ranges (1-2) and empty nodes (3.1) carry no arcs
        if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;

        ConlluWord w;
        w.form = cols[1];
        w.punct = cols[3] == "PUNCT";
        w.deprel = cols[7];
        if (cols[6] == "_") {
            w.head = 0;
        } else {
            try {
                w.head = std::stoi(cols[6]);
            } catch (const std::exception&) {
                throw std::runtime_error(fmt::format(
                    "'{}' line {}: HEAD column '{}' is not an integer", path.string(), line_no, cols[6]));
            }
        }
        const int expected = static_cast<int>(sent.size()) + 1;
        int got = 0;
        try {
            got = std::stoi(id);
        } catch (const std::exception&) {
            throw std::runtime_error(fmt::format("'{}' line {}: ID column '{}' is not an integer",
                                                 path.string(), line_no, id));
        }
        if (got != expected) {
            throw std::runtime_error(fmt::format(
                "'{}' line {}: word ID {} out of order (expected {})", path.string(), line_no, got, expected));
        }
        sent.push_back(std::move(w));
    }
    flush_sentence(sent, out);
    return out;
}

std::vector<DependencyInstance> read_reflexive_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open reflexive corpus '{}'", path.string()));
    }
    std::vector<DependencyInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format("'{}' line {}: malformed JSON: {}",
                                                 path.string(), line_no, e.what()));
        }
        DependencyInstance inst;
        std::string text;
        try {
            text = doc.at("text").get<std::string>();
            inst.dependent = doc.at("antecedent_word_index").get<int>();
            inst.governor = doc.at("anaphor_word_index").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format(
                "'{}' line {}: expected text/antecedent_word_index/anaphor_word_index: {}",
                path.string(), line_no, e.what()));
        }
        // whitespace-split words
        std::size_t pos = 0;
        while (pos < text.size()) {
            while (pos < text.size() && text[pos] == ' ') ++pos;
            if (pos >= text.size()) break;
            std::size_t end = text.find(' ', pos);
            if (end == std::string::npos) end = text.size();
            inst.words.push_back(text.substr(pos, end - pos));
            pos = end;
        }
        const int n = static_cast<int>(inst.words.size());
        if (inst.dependent < 0 || inst.dependent >= n || inst.governor < 0 ||
            inst.governor >= n || inst.dependent == inst.governor) {
            throw std::runtime_error(fmt::format(
                "'{}' line {}: word indices {}/{} invalid for {} words",
                path.string(), line_no, inst.dependent, inst.governor, n));
        }
        inst.relation = kReflexiveRelation;
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<DependencyInstance> filter_relation(std::span<const DependencyInstance> corpus,
                                                const std::string& relation) {
    std::vector<DependencyInstance> out;
    for (const DependencyInstance& inst : corpus) {
        if (inst.relation == relation) out.push_back(inst);
    }
    return out;
}

RelativePositionBaseline compute_baseline(std::span<const DependencyInstance> corpus,
                                          const std::string& relation,
                                          bool skip_punct_offsets) {
    std::map<long, std::size_t> histogram;
    std::size_t total = 0;
    for (const DependencyInstance& inst : corpus) {
        if (inst.relation != relation) continue;
        long dep = inst.dependent;
        long gov = inst.governor;
        if (skip_punct_offsets && !inst.is_punct.empty()) {
            auto rank = [&](int word) {
                long r = 0;
                for (int i = 0; i < word; ++i) {
                    if (!inst.is_punct[static_cast<std::size_t>(i)]) ++r;
                }
                return r;
            };
            if (inst.is_punct[inst.dependent] || inst.is_punct[inst.governor]) continue;
            dep = rank(inst.dependent);
            gov = rank(inst.governor);
        }
        ++histogram[dep - gov];
        ++total;
    }
    if (total == 0) {
        throw std::runtime_error(fmt::format("corpus has no instances of relation '{}'", relation));
    }
    long best_offset = 0;
    std::size_t best_count = 0;
    for (const auto& [offset, count] : histogram) {
        const bool better = count > best_count ||
                            (count == best_count &&
                             (std::labs(offset) < std::labs(best_offset) ||
                              (std::labs(offset) == std::labs(best_offset) && offset < best_offset)));
        if (best_count == 0 || better) {
            best_offset = offset;
            best_count = count;
        }
    }
    return {relation, best_offset, static_cast<double>(best_count) / static_cast<double>(total), total};
}

HeadAccuracyTable score_all_heads(const Model& model, const Tokenizer& tokenizer,
                                  std::span<const DependencyInstance> corpus,
                                  const std::string& relation,
                                  const HeadSearchOptions& options) {
    const std::vector<DependencyInstance> instances = filter_relation(corpus, relation);
    if (instances.empty()) {
        throw std::runtime_error(fmt::format("corpus has no instances of relation '{}'", relation));
    }
    const int n_layers = model.config().n_layers;
    const int n_heads = model.config().n_heads;
    const std::size_t n_cells = static_cast<std::size_t>(n_layers) * n_heads;

    std::vector<std::vector<std::size_t>> hit_slots(instances.size());
    std::vector<std::uint8_t> skipped(instances.size(), 0);

    parallel_for(instances.size(), options.workers, [&](std::size_t idx) {
        const DependencyInstance& inst = instances[idx];
        std::vector<std::size_t> word_starts;
        const std::string text = join_words(inst.words, &word_starts);
        const std::vector<TokenSpan> spans = tokenizer.encode(text);
        if (static_cast<int>(spans.size()) > model.config().max_context || spans.empty()) {
            skipped[idx] = 1;
            return;
        }

        auto word_range = [&](int word) {
            const std::size_t start = word_starts[static_cast<std::size_t>(word)];
            const std::size_t end = start + inst.words[static_cast<std::size_t>(word)].size();
            return locate_span(spans, start, end);
        };
        const TokenRange gov_tokens = word_range(inst.governor);
        const TokenRange dep_tokens = word_range(inst.dependent);
        const int anchor = options.anchor_last_subtoken ? gov_tokens.last - 1 : gov_tokens.first;

        const ActivationTrace trace = model.forward(Tokenizer::ids(spans));
        const int domain_end = options.include_self ? anchor + 1 : anchor;

        // token index -> word index, for the word-level argmax variant
        std::vector<int> token_word;
        if (options.word_level_argmax) {
            token_word.assign(spans.size(), -1);
            for (std::size_t w = 0; w < inst.words.size(); ++w) {
                const TokenRange r = word_range(static_cast<int>(w));
                for (int j = r.first; j < r.last; ++j) {
                    token_word[static_cast<std::size_t>(j)] = static_cast<int>(w);
                }
            }
        }

        std::vector<std::size_t> hits;
        for (int l = 0; l < n_layers; ++l) {
            for (int h = 0; h < n_heads; ++h) {
                if (domain_end <= 0) continue;
                auto row = trace.attention_row(l, h, anchor);
                bool hit = false;
                if (options.word_level_argmax) {
                    std::vector<double> mass(inst.words.size(), -1.0);
                    for (int j = 0; j < domain_end; ++j) {
                        const int w = token_word[static_cast<std::size_t>(j)];
                        if (w < 0) continue;
                        if (mass[static_cast<std::size_t>(w)] < 0.0) mass[static_cast<std::size_t>(w)] = 0.0;
                        mass[static_cast<std::size_t>(w)] += row[static_cast<std::size_t>(j)];
                    }
                    int argmax_word = -1;
                    for (std::size_t w = 0; w < mass.size(); ++w) {
                        if (mass[w] >= 0.0 &&
                            (argmax_word < 0 || mass[w] > mass[static_cast<std::size_t>(argmax_word)])) {
                            argmax_word = static_cast<int>(w);
                        }
                    }
                    hit = argmax_word == inst.dependent;
                } else {
                    int argmax = 0;
                    for (int j = 1; j < domain_end; ++j) {
                        if (row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(argmax)]) {
                            argmax = j;
                        }
                    }
                    hit = argmax >= dep_tokens.first && argmax < dep_tokens.last;
                }
                if (hit) hits.push_back(static_cast<std::size_t>(l) * n_heads + h);
            }
        }
        hit_slots[idx] = std::move(hits);
    });

    HeadAccuracyTable table;
    table.n_layers = n_layers;
    table.n_heads = n_heads;
    table.relation = relation;
    table.hits.assign(n_cells, 0);
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
        if (skipped[idx]) {
            ++table.n_skipped;
            continue;
        }
        ++table.n_instances;
        for (std::size_t cell : hit_slots[idx]) ++table.hits[cell];
    }
    if (table.n_instances == 0) {
        throw std::runtime_error(fmt::format(
            "every sentence with relation '{}' exceeded the model context", relation));
    }
    return table;
}

HeadScore head_accuracy(const Model& model, const Tokenizer& tokenizer,
                        std::span<const DependencyInstance> corpus,
                        const std::string& relation, HeadRef head,
                        const HeadSearchOptions& options) {
    if (head.layer < 0 || head.layer >= model.config().n_layers || head.head < 0 ||
        head.head >= model.config().n_heads) {
        throw std::out_of_range(fmt::format("head {}/{} outside model of {} layers x {} heads",
                                            head.layer, head.head, model.config().n_layers,
                                            model.config().n_heads));
    }
    const HeadAccuracyTable table = score_all_heads(model, tokenizer, corpus, relation, options);
    const std::size_t hits = table.hits_for(head.layer, head.head);
    return {head.layer, head.head, relation,
            static_cast<double>(hits) / static_cast<double>(table.n_instances), hits,
            table.n_instances};
}

SpecializedHeads find_specialized(const Model& model, const Tokenizer& tokenizer,
                                  std::span<const DependencyInstance> corpus,
                                  const std::string& relation,
                                  const HeadSearchOptions& options) {
    SpecializedHeads result;
    result.baseline = compute_baseline(corpus, relation, options.skip_punct_offsets);
    result.threshold = 1.1 * result.baseline.proportion;

    const HeadAccuracyTable table = score_all_heads(model, tokenizer, corpus, relation, options);
    result.n_skipped = table.n_skipped;

    for (int l = 0; l < table.n_layers; ++l) {
        for (int h = 0; h < table.n_heads; ++h) {
            const std::size_t hits = table.hits_for(l, h);
            result.all.push_back({l, h, relation,
                                  static_cast<double>(hits) / static_cast<double>(table.n_instances),
                                  hits, table.n_instances});
        }
    }
    auto by_accuracy = [](const HeadScore& a, const HeadScore& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.head < b.head;
    };
    std::sort(result.all.begin(), result.all.end(), by_accuracy);
    for (const HeadScore& score : result.all) {
        if (score.accuracy >= result.threshold) result.specialized.push_back(score);
    }
    return result;
}

}  // namespace lmprobe
