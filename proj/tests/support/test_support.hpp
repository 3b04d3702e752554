#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lmprobe/metrics.hpp"
#include "lmprobe/model.hpp"

namespace lmprobe::testing {

// Repo root for fixture paths; overridable with LMPROBE_DATA_ROOT.
std::filesystem::path data_root();

struct NamedTensor {
    std::vector<std::int64_t> shape;
    std::vector<float> values;
};

// Minimal F32 safetensors writer for fixtures and failure-injection tests.
void write_safetensors(const std::filesystem::path& path,
                       const std::map<std::string, NamedTensor>& tensors);

// Full zero-weight GPT-2 tensor set for `config` (layer norms at 1.0).
std::map<std::string, NamedTensor> zero_checkpoint_tensors(const ModelConfig& config);

// Plants one attention head that one-hots positions holding `marker_token`:
// the head's query is a constant bias and its key reads the first embedding
// channel, which only the marker token carries.
std::map<std::string, NamedTensor> planted_checkpoint_tensors(const ModelConfig& config,
                                                              int marker_token, HeadRef head);

// 3 layers x 6 heads, d_model 24, full GPT-2 vocabulary.
ModelConfig planted_config();

std::filesystem::path scratch_dir(const std::string& tag);

// Frozen reference-run outputs produced by scripts/make_reference_fixtures.py.
struct MicroGoldens {
    int vocab_size = 0;
    struct Sequence {
        std::vector<int> ids;
        std::vector<double> surprisal_bits;
        std::vector<float> logits;  // [len][vocab_size]
    };
    std::vector<Sequence> sequences;
    int attn_sequence_index = 0;
    std::vector<std::int64_t> attn_shape;  // [layers, heads, len, len]
    std::vector<float> attn;
};
MicroGoldens load_micro_goldens();

struct RefSmallGoldens {
    std::vector<int> sample_indices;
    struct Sentence {
        std::string text;
        std::vector<int> ids;
        std::vector<double> surprisal_bits;
        std::vector<int> argmax;
        std::vector<float> sampled_logits;  // [len][sample_indices.size()]
    };
    std::vector<Sentence> sentences;
};
RefSmallGoldens load_ref_small_goldens();

std::vector<float> read_f32_file(const std::filesystem::path& path);

}  // namespace lmprobe::testing
