#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace lmprobe {

struct ModelConfig {
    int n_layers = 12;
    int n_heads = 12;
    int d_model = 768;
    int vocab_size = 50257;
    int max_context = 1024;
    double layer_norm_epsilon = 1e-5;

    int d_head() const { return d_model / n_heads; }
    void validate() const;

    // Reads {n_layer, n_head, n_embd, vocab_size, n_positions,
    // layer_norm_epsilon}; absent keys keep the defaults above.
    static ModelConfig from_json_file(const std::filesystem::path& path);
};

// Forward-pass capture: next-token logits for every position and the
// post-softmax attention matrix of every head.
struct ActivationTrace {
    int n_tokens = 0;
    int n_layers = 0;
    int n_heads = 0;
    int vocab_size = 0;
    std::vector<int> tokens;
    std::vector<float> logits;      // [n_tokens][vocab_size]
    std::vector<float> attentions;  // [n_layers][n_heads][n_tokens][n_tokens], causal rows

    std::span<const float> logits_row(int position) const;
    std::span<const float> attention_row(int layer, int head, int from) const;
    float attention(int layer, int head, int from, int to) const;
};

// softmax of the logits row at `position`, accumulated in double precision
std::vector<double> next_token_distribution(const ActivationTrace& trace, int position);

class Model {
public:
    // Loads a GPT-2-family named-tensor archive. Tensor names follow the
    // published convention (wte.weight, h.<i>.attn.c_attn.weight, ...);
    // an optional "transformer." prefix is stripped, and the mask buffers
    // plus the tied lm_head.weight are skipped. All weights are widened to
    // 32-bit floats. See docs/file-formats.md for the accepted name set.
    static Model load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    // Full-sequence forward pass (no KV cache); safe to call concurrently.
    ActivationTrace forward(std::span<const int> tokens) const;

    struct LayerWeights {
        std::vector<float> ln1_w, ln1_b;
        std::vector<float> qkv_w, qkv_b;    // [d_model][3*d_model] row-major, [3*d_model]
        std::vector<float> attn_proj_w, attn_proj_b;
        std::vector<float> ln2_w, ln2_b;
        std::vector<float> mlp_fc_w, mlp_fc_b;      // [d_model][4*d_model]
        std::vector<float> mlp_proj_w, mlp_proj_b;  // [4*d_model][d_model]
    };

    // Test support: assemble a model from in-memory tensors.
    Model(ModelConfig config, std::vector<float> wte, std::vector<float> wpe,
          std::vector<LayerWeights> layers, std::vector<float> lnf_w, std::vector<float> lnf_b);

private:
    ModelConfig config_;
    std::vector<float> wte_;  // [vocab_size][d_model]; also the unembedding (tied)
    std::vector<float> wpe_;  // [max_context][d_model]
    std::vector<LayerWeights> layers_;
    std::vector<float> lnf_w_, lnf_b_;
};

}  // namespace lmprobe
