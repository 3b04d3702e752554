#include "lmprobe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lmprobe/parallel.hpp"

namespace lmprobe {

namespace {

ByteRange parse_range(const nlohmann::json& value, const char* field, const std::string& item_id) {
    if (!value.is_array() || value.size() != 2) {
        throw std::runtime_error(fmt::format("item '{}': {} must be a [start, end) byte pair",
                                             item_id, field));
    }
    const long long start = value[0].get<long long>();
    const long long end = value[1].get<long long>();
    if (start < 0 || end < start) {
        throw std::runtime_error(fmt::format("item '{}': {} range [{}, {}) is malformed",
                                             item_id, field, start, end));
    }
    return {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
}

bool overlaps(const ByteRange& a, const ByteRange& b) {
    return a.start < b.end && b.start < a.end;
}

void validate_item(const StimulusItem& item) {
    auto check = [&](const ByteRange& r, const char* field) {
        if (r.end > item.text.size() || r.start >= r.end) {
            throw std::runtime_error(fmt::format(
                "item '{}': {} range [{}, {}) outside text of {} bytes",
                item.item_id, field, r.start, r.end, item.text.size()));
        }
    };
    check(item.critical_word, "critical_word");
    if (item.target_word) check(*item.target_word, "target_word");
    if (item.distractor_word) check(*item.distractor_word, "distractor_word");

    std::vector<std::pair<ByteRange, const char*>> ranges = {{item.critical_word, "critical_word"}};
    if (item.target_word) ranges.push_back({*item.target_word, "target_word"});
    if (item.distractor_word) ranges.push_back({*item.distractor_word, "distractor_word"});
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        for (std::size_t j = i + 1; j < ranges.size(); ++j) {
            if (overlaps(ranges[i].first, ranges[j].first)) {
                throw std::runtime_error(fmt::format("item '{}': {} and {} overlap",
                                                     item.item_id, ranges[i].second, ranges[j].second));
            }
        }
    }
    if (item.interference != "int" && item.interference != "non-int") {
        throw std::runtime_error(fmt::format("item '{}': interference must be int|non-int, got '{}'",
                                             item.item_id, item.interference));
    }
    if (item.grammaticality != "gram" && item.grammaticality != "ungram") {
        throw std::runtime_error(fmt::format("item '{}': grammaticality must be gram|ungram, got '{}'",
                                             item.item_id, item.grammaticality));
    }
    if (!item.subject_number.empty() && item.subject_number != "sg" && item.subject_number != "pl") {
        throw std::runtime_error(fmt::format("item '{}': subject_number must be sg|pl or absent, got '{}'",
                                             item.item_id, item.subject_number));
    }
}

void validate_sets(std::span<const StimulusItem> items) {
    // set -> subject-number level -> cell -> count
    std::map<std::string, std::map<std::string, std::map<std::string, int>>> cells;
    for (const StimulusItem& item : items) {
        ++cells[item.set_id][item.subject_number][item.interference + "/" + item.grammaticality];
    }
    static const char* kCells[4] = {"int/gram", "int/ungram", "non-int/gram", "non-int/ungram"};
    for (const auto& [set_id, levels] : cells) {
        for (const auto& [subject, counts] : levels) {
            for (const char* cell : kCells) {
                const auto it = counts.find(cell);
                const int n = it == counts.end() ? 0 : it->second;
                if (n != 1) {
                    throw std::runtime_error(fmt::format(
                        "set '{}'{} has {} items in cell {} (each cell must appear exactly once)",
                        set_id,
                        subject.empty() ? std::string{} : fmt::format(" (subject {})", subject),
                        n, cell));
                }
            }
        }
    }
}

}  // namespace

std::vector<StimulusItem> load_stimuli(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open stimulus file '{}'", path.string()));
    }
    std::vector<StimulusItem> items;
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
        StimulusItem item;
        try {
            item.item_id = doc.at("item_id").get<std::string>();
            item.set_id = doc.at("set_id").get<std::string>();
            item.interference = doc.at("interference").get<std::string>();
            item.grammaticality = doc.at("grammaticality").get<std::string>();
            item.text = doc.at("text").get<std::string>();
            if (doc.contains("subject_number") && !doc["subject_number"].is_null()) {
                item.subject_number = doc["subject_number"].get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format("'{}' line {}: missing stimulus field: {}",
                                                 path.string(), line_no, e.what()));
        }
        item.critical_word = parse_range(doc.at("critical_word"), "critical_word", item.item_id);
        if (doc.contains("target_word") && !doc["target_word"].is_null()) {
            item.target_word = parse_range(doc["target_word"], "target_word", item.item_id);
        }
        if (doc.contains("distractor_word") && !doc["distractor_word"].is_null()) {
            item.distractor_word = parse_range(doc["distractor_word"], "distractor_word", item.item_id);
        }
        validate_item(item);
        items.push_back(std::move(item));
    }
    validate_sets(items);
    return items;
}

std::vector<ItemRecord> run_experiment(const Model& model, const Tokenizer& tokenizer,
                                       std::span<const StimulusItem> items, HeadRef head,
                                       const ExperimentOptions& options) {
    if (head.layer < 0 || head.layer >= model.config().n_layers || head.head < 0 ||
        head.head >= model.config().n_heads) {
        throw std::out_of_range(fmt::format("head {}/{} outside model of {} layers x {} heads",
                                            head.layer, head.head, model.config().n_layers,
                                            model.config().n_heads));
    }

    std::vector<ItemRecord> records(items.size());
    parallel_for(items.size(), options.workers, [&](std::size_t idx) {
        const StimulusItem& item = items[idx];
        const std::vector<TokenSpan> spans = tokenizer.encode(item.text);

        ByteRange region = item.critical_word;
        if (options.spillover_words > 0) {
            // extend across the following N whitespace-delimited words
            std::size_t pos = region.end;
            for (int w = 0; w < options.spillover_words && pos < item.text.size(); ++w) {
                while (pos < item.text.size() && item.text[pos] == ' ') ++pos;
                while (pos < item.text.size() && item.text[pos] != ' ') ++pos;
            }
            region.end = pos;
        }

        TokenRange critical;
        try {
            critical = locate_span(spans, region.start, region.end);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("item '{}': cannot locate critical word: {}",
                                                 item.item_id, e.what()));
        }
        if (critical.first == 0) {
            throw std::runtime_error(fmt::format(
                "item '{}': critical word starts the sentence, surprisal needs left context",
                item.item_id));
        }
        if (critical.last > model.config().max_context) {
            throw std::runtime_error(fmt::format(
                "item '{}': critical word ends at token {} beyond the model context {}; item rejected",
                item.item_id, critical.last, model.config().max_context));
        }

        // evaluate on the text up to and including the critical word
        std::vector<int> ids = Tokenizer::ids(spans);
        ids.resize(static_cast<std::size_t>(critical.last));
        const ActivationTrace trace = model.forward(ids);

        ItemRecord rec;
        rec.item_id = item.item_id;
        rec.set_id = item.set_id;
        rec.interference = item.interference;
        rec.grammaticality = item.grammaticality;
        rec.subject_number = item.subject_number;
        rec.head = head;
        rec.n_tokens = static_cast<int>(ids.size());
        rec.critical_tokens = critical;
        rec.anchor_position = options.anchor_last_subtoken ? critical.last - 1 : critical.first;
        rec.surprisal_bits = surprisal_bits(trace, critical);
        rec.attention_entropy_bits = attention_entropy_bits(trace, head, rec.anchor_position);
        if (item.target_word) {
            TokenRange target;
            try {
                target = locate_span(spans, item.target_word->start, item.target_word->end);
            } catch (const std::exception& e) {
                throw std::runtime_error(fmt::format("item '{}': cannot locate target word: {}",
                                                     item.item_id, e.what()));
            }
            rec.attention_to_target = attention_to_target(trace, head, rec.anchor_position, target);
        }
        records[idx] = std::move(rec);
    });
    return records;
}

const char* const kMetricNames[3] = {"surprisal", "attention_entropy", "attention_to_target"};

double metric_value(const ItemRecord& record, const std::string& metric) {
    if (metric == "surprisal") return record.surprisal_bits;
    if (metric == "attention_entropy") return record.attention_entropy_bits;
    if (metric == "attention_to_target") {
        if (!record.attention_to_target) {
            throw std::runtime_error(fmt::format("item '{}' has no target word", record.item_id));
        }
        return *record.attention_to_target;
    }
    throw std::invalid_argument(fmt::format("unknown metric '{}'", metric));
}

bool metric_defined(const ItemRecord& record, const std::string& metric) {
    if (metric == "surprisal" || metric == "attention_entropy") return true;
    if (metric == "attention_to_target") return record.attention_to_target.has_value();
    throw std::invalid_argument(fmt::format("unknown metric '{}'", metric));
}

std::vector<ConditionSummary> summarize(std::span<const ItemRecord> records,
                                        const std::string& metric) {
    // condition key -> values; std::map keeps output order canonical
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
    for (const ItemRecord& rec : records) {
        if (!metric_defined(rec, metric)) continue;
        groups[{rec.grammaticality, rec.interference, rec.subject_number}].push_back(
            metric_value(rec, metric));
    }
    std::vector<ConditionSummary> out;
    for (const auto& [key, values] : groups) {
        ConditionSummary cs;
        cs.grammaticality = std::get<0>(key);
        cs.interference = std::get<1>(key);
        cs.subject_number = std::get<2>(key);
        cs.metric = metric;
        cs.stats = summarize_values(values);
        out.push_back(std::move(cs));
    }
    return out;
}

std::vector<InterferenceEffect> interference_effects(std::span<const ItemRecord> records,
                                                     const std::string& metric) {
    // (grammaticality, subject) -> set_id -> (int value, non-int value)
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::map<std::string, std::pair<std::optional<double>, std::optional<double>>>> cells;
    for (const ItemRecord& rec : records) {
        if (!metric_defined(rec, metric)) continue;
        auto& cell = cells[{rec.grammaticality, rec.subject_number}][rec.set_id];
        auto& slot = rec.interference == "int" ? cell.first : cell.second;
        if (slot) {
            throw std::runtime_error(fmt::format(
                "set '{}' has duplicate {} items in the {} condition",
                rec.set_id, rec.interference, rec.grammaticality));
        }
        slot = metric_value(rec, metric);
    }

    std::vector<InterferenceEffect> out;
    for (const auto& [key, sets] : cells) {
        std::vector<double> diffs;
        for (const auto& [set_id, pair] : sets) {
            if (!pair.first || !pair.second) {
                throw std::runtime_error(fmt::format(
                    "set '{}' is unpaired in the {} condition: both int and non-int cells are required",
                    set_id, key.first));
            }
            diffs.push_back(*pair.first - *pair.second);
        }
        const Summary s = summarize_values(diffs);
        InterferenceEffect eff;
        eff.grammaticality = key.first;
        eff.subject_number = key.second;
        eff.metric = metric;
        eff.n_pairs = s.n;
        eff.effect = s.mean;
        eff.ci95_low = s.ci95_low;
        eff.ci95_high = s.ci95_high;
        eff.ci_defined = s.ci_defined;
        out.push_back(std::move(eff));
    }
    return out;
}

}  // namespace lmprobe
