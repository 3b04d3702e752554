#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lmprobe/metrics.hpp"
#include "lmprobe/model.hpp"
#include "lmprobe/tokenizer.hpp"

namespace lmprobe {

// One dependency arc over whitespace-delimited corpus words. For relations
// where attention flows from a later word back to an earlier one (nsubj,
// reflexive-antecedent), the governor is the attending word.
struct DependencyInstance {
    std::vector<std::string> words;
    std::vector<std::uint8_t> is_punct;  // parallel to words; empty when unknown
    int dependent = 0;                   // 0-based word index
    int governor = 0;
    std::string relation;
};

struct RelativePositionBaseline {
    std::string relation;
    long modal_offset = 0;  // dependent - governor, in words
    double proportion = 0.0;
    std::size_t n_instances = 0;
};

struct HeadScore {
    int layer = 0;
    int head = 0;
    std::string relation;
    double accuracy = 0.0;  // hits / n_instances
    std::size_t hits = 0;
    std::size_t n_instances = 0;
};

struct HeadSearchOptions {
    bool anchor_last_subtoken = true;  // governor anchor; false = first subtoken
    bool include_self = false;         // admit the anchor position into the argmax
    bool skip_punct_offsets = false;   // count offsets over non-punctuation words only
    bool word_level_argmax = false;    // argmax over per-word attention mass, not subtokens
    int workers = 1;
};

// Ten-column CoNLL-U; uses ID, FORM, UPOS, HEAD, DEPREL and skips comments,
// multiword-token ranges, and empty nodes. Returns one instance per
// non-root arc.
std::vector<DependencyInstance> read_conllu(const std::filesystem::path& path);

// JSON-lines {text, antecedent_word_index, anaphor_word_index}; indices are
// 0-based over whitespace-split words. CoNLL-U cannot express coreference,
// hence the sidecar format.
std::vector<DependencyInstance> read_reflexive_jsonl(const std::filesystem::path& path);

constexpr const char* kReflexiveRelation = "reflexive-antecedent";

std::vector<DependencyInstance> filter_relation(std::span<const DependencyInstance> corpus,
                                                const std::string& relation);

// Histogram of (dependent - governor) word offsets for one relation; the
// modal offset's share is the specialization baseline. Ties break toward
// the smaller absolute offset.
RelativePositionBaseline compute_baseline(std::span<const DependencyInstance> corpus,
                                          const std::string& relation,
                                          bool skip_punct_offsets = false);

struct HeadAccuracyTable {
    int n_layers = 0;
    int n_heads = 0;
    std::string relation;
    std::vector<std::size_t> hits;  // [n_layers * n_heads]
    std::size_t n_instances = 0;    // instances actually scored
    std::size_t n_skipped = 0;      // sentences that did not fit max context

    std::size_t hits_for(int layer, int head) const {
        return hits[static_cast<std::size_t>(layer) * n_heads + head];
    }
};

// Scores every head in one pass: an instance is a hit for a head when the
// argmax of the governor-anchor attention row over strictly prior positions
// lands on any subtoken of the dependent word.
HeadAccuracyTable score_all_heads(const Model& model, const Tokenizer& tokenizer,
                                  std::span<const DependencyInstance> corpus,
                                  const std::string& relation,
                                  const HeadSearchOptions& options = {});

HeadScore head_accuracy(const Model& model, const Tokenizer& tokenizer,
                        std::span<const DependencyInstance> corpus,
                        const std::string& relation, HeadRef head,
                        const HeadSearchOptions& options = {});

struct SpecializedHeads {
    RelativePositionBaseline baseline;
    double threshold = 0.0;  // 1.1 x baseline proportion
    std::vector<HeadScore> specialized;  // accuracy >= threshold, descending
    std::vector<HeadScore> all;          // every head, descending accuracy
    std::size_t n_skipped = 0;
};

SpecializedHeads find_specialized(const Model& model, const Tokenizer& tokenizer,
                                  std::span<const DependencyInstance> corpus,
                                  const std::string& relation,
                                  const HeadSearchOptions& options = {});

}  // namespace lmprobe
