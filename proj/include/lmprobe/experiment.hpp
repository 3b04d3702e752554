#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmprobe/metrics.hpp"
#include "lmprobe/model.hpp"
#include "lmprobe/stats.hpp"
#include "lmprobe/tokenizer.hpp"

namespace lmprobe {

struct ByteRange {
    std::size_t start = 0;
    std::size_t end = 0;
};

// One cell of a 2x2 (or 2x2x2) factorial set. subject_number is empty when
// the design does not manipulate it.
struct StimulusItem {
    std::string item_id;
    std::string set_id;
    std::string interference;    // "int" | "non-int"
    std::string grammaticality;  // "gram" | "ungram"
    std::string subject_number;  // "sg" | "pl" | ""
    std::string text;
    ByteRange critical_word;
    std::optional<ByteRange> target_word;
    std::optional<ByteRange> distractor_word;
};

// JSON-lines, one item per line; validates spans and factorial completeness
// (every interference x grammaticality cell exactly once per set and
// subject-number level).
std::vector<StimulusItem> load_stimuli(const std::filesystem::path& path);

struct ItemRecord {
    std::string item_id;
    std::string set_id;
    std::string interference;
    std::string grammaticality;
    std::string subject_number;
    HeadRef head;
    int n_tokens = 0;       // tokens fed to the model (text up to the critical word)
    int anchor_position = 0;
    TokenRange critical_tokens;
    double surprisal_bits = 0.0;
    double attention_entropy_bits = 0.0;
    std::optional<double> attention_to_target;
};

struct ExperimentOptions {
    bool anchor_last_subtoken = false;  // attention metrics anchor; default first
    int spillover_words = 0;            // extend the critical region this many words
    int workers = 1;
};

// One record per item, in item order; deterministic for a fixed model.
std::vector<ItemRecord> run_experiment(const Model& model, const Tokenizer& tokenizer,
                                       std::span<const StimulusItem> items, HeadRef head,
                                       const ExperimentOptions& options = {});

extern const char* const kMetricNames[3];  // surprisal, attention_entropy, attention_to_target

double metric_value(const ItemRecord& record, const std::string& metric);
bool metric_defined(const ItemRecord& record, const std::string& metric);

struct ConditionSummary {
    std::string interference;
    std::string grammaticality;
    std::string subject_number;
    std::string metric;
    Summary stats;
};

std::vector<ConditionSummary> summarize(std::span<const ItemRecord> records,
                                        const std::string& metric);

// Paired interference effect, mean over per-set (int - non-int) differences
// within one grammaticality (and subject-number) level. A negative effect in
// the ungrammatical conditions is facilitation.
struct InterferenceEffect {
    std::string grammaticality;
    std::string subject_number;
    std::string metric;
    std::size_t n_pairs = 0;
    double effect = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    bool ci_defined = false;
};

std::vector<InterferenceEffect> interference_effects(std::span<const ItemRecord> records,
                                                     const std::string& metric);

}  // namespace lmprobe
