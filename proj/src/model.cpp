#include "lmprobe/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lmprobe/kernels.hpp"
#include "lmprobe/safetensors.hpp"

namespace lmprobe {

void ModelConfig::validate() const {
    if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || vocab_size <= 0 || max_context <= 0) {
        throw std::runtime_error("model config: all counts must be strictly positive");
    }
    if (d_model % n_heads != 0) {
        throw std::runtime_error(fmt::format(
            "model config: d_model {} is not divisible by n_heads {}", d_model, n_heads));
    }
    if (layer_norm_epsilon <= 0.0) {
        throw std::runtime_error("model config: layer_norm_epsilon must be positive");
    }
}

ModelConfig ModelConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open model config '{}'", path.string()));
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("malformed model config '{}': {}", path.string(), e.what()));
    }
    ModelConfig cfg;
    if (doc.contains("n_layer")) cfg.n_layers = doc["n_layer"].get<int>();
    if (doc.contains("n_head")) cfg.n_heads = doc["n_head"].get<int>();
    if (doc.contains("n_embd")) cfg.d_model = doc["n_embd"].get<int>();
    if (doc.contains("vocab_size")) cfg.vocab_size = doc["vocab_size"].get<int>();
    if (doc.contains("n_positions")) cfg.max_context = doc["n_positions"].get<int>();
    if (doc.contains("layer_norm_epsilon")) cfg.layer_norm_epsilon = doc["layer_norm_epsilon"].get<double>();
    cfg.validate();
    return cfg;
}

std::span<const float> ActivationTrace::logits_row(int position) const {
    if (position < 0 || position >= n_tokens) {
        throw std::out_of_range(fmt::format("position {} outside trace of {} tokens", position, n_tokens));
    }
    return {logits.data() + static_cast<std::size_t>(position) * vocab_size,
            static_cast<std::size_t>(vocab_size)};
}

std::span<const float> ActivationTrace::attention_row(int layer, int head, int from) const {
    if (layer < 0 || layer >= n_layers || head < 0 || head >= n_heads) {
        throw std::out_of_range(fmt::format("head {}/{} outside model of {} layers x {} heads",
                                            layer, head, n_layers, n_heads));
    }
    if (from < 0 || from >= n_tokens) {
        throw std::out_of_range(fmt::format("position {} outside trace of {} tokens", from, n_tokens));
    }
    const std::size_t nt = static_cast<std::size_t>(n_tokens);
    const std::size_t base = ((static_cast<std::size_t>(layer) * n_heads + head) * nt + from) * nt;
    return {attentions.data() + base, nt};
}

float ActivationTrace::attention(int layer, int head, int from, int to) const {
    auto row = attention_row(layer, head, from);
    if (to < 0 || to >= n_tokens) {
        throw std::out_of_range(fmt::format("position {} outside trace of {} tokens", to, n_tokens));
    }
    return row[static_cast<std::size_t>(to)];
}

std::vector<double> next_token_distribution(const ActivationTrace& trace, int position) {
    auto row = trace.logits_row(position);
    double max = row[0];
    for (float v : row) max = std::max(max, static_cast<double>(v));
    std::vector<double> probs(row.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        probs[i] = std::exp(static_cast<double>(row[i]) - max);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

namespace {

// tanh-approximation GELU, matching the published GPT-2 activation
void gelu_inplace(float* x, std::size_t n) {
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    for (std::size_t i = 0; i < n; ++i) {
        const float v = x[i];
        x[i] = 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + 0.044715f * v * v * v)));
    }
}

std::string layer_tensor(int layer, const char* suffix) {
    return fmt::format("h.{}.{}", layer, suffix);
}

}  // namespace

Model::Model(ModelConfig config, std::vector<float> wte, std::vector<float> wpe,
             std::vector<LayerWeights> layers, std::vector<float> lnf_w, std::vector<float> lnf_b)
    : config_(config),
      wte_(std::move(wte)),
      wpe_(std::move(wpe)),
      layers_(std::move(layers)),
      lnf_w_(std::move(lnf_w)),
      lnf_b_(std::move(lnf_b)) {
    config_.validate();
}

Model Model::load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
    config.validate();
    SafetensorsFile file(path);

    // published checkpoints sometimes carry a "transformer." prefix
    const std::string prefix = file.contains("transformer.wte.weight") ? "transformer." : "";
    auto read = [&](const std::string& name, std::vector<std::int64_t> shape) {
        return file.read_f32(prefix + name, shape);
    };

    const std::int64_t d = config.d_model;
    std::vector<float> wte = read("wte.weight", {config.vocab_size, d});
    std::vector<float> wpe = read("wpe.weight", {config.max_context, d});

    std::vector<LayerWeights> layers(config.n_layers);
    for (int l = 0; l < config.n_layers; ++l) {
        LayerWeights& lw = layers[l];
        lw.ln1_w = read(layer_tensor(l, "ln_1.weight"), {d});
        lw.ln1_b = read(layer_tensor(l, "ln_1.bias"), {d});
        lw.qkv_w = read(layer_tensor(l, "attn.c_attn.weight"), {d, 3 * d});
        lw.qkv_b = read(layer_tensor(l, "attn.c_attn.bias"), {3 * d});
        lw.attn_proj_w = read(layer_tensor(l, "attn.c_proj.weight"), {d, d});
        lw.attn_proj_b = read(layer_tensor(l, "attn.c_proj.bias"), {d});
        lw.ln2_w = read(layer_tensor(l, "ln_2.weight"), {d});
        lw.ln2_b = read(layer_tensor(l, "ln_2.bias"), {d});
        lw.mlp_fc_w = read(layer_tensor(l, "mlp.c_fc.weight"), {d, 4 * d});
        lw.mlp_fc_b = read(layer_tensor(l, "mlp.c_fc.bias"), {4 * d});
        lw.mlp_proj_w = read(layer_tensor(l, "mlp.c_proj.weight"), {4 * d, d});
        lw.mlp_proj_b = read(layer_tensor(l, "mlp.c_proj.bias"), {d});
    }
    std::vector<float> lnf_w = read("ln_f.weight", {d});
    std::vector<float> lnf_b = read("ln_f.bias", {d});

    return Model(config, std::move(wte), std::move(wpe), std::move(layers),
                 std::move(lnf_w), std::move(lnf_b));
}

ActivationTrace Model::forward(std::span<const int> tokens) const {
    const auto& K = kern::active_kernels();
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw std::invalid_argument("forward: empty token sequence");
    if (n > config_.max_context) {
        throw std::invalid_argument(fmt::format(
            "forward: {} tokens exceed max context {}", n, config_.max_context));
    }
    for (int t = 0; t < n; ++t) {
        if (tokens[t] < 0 || tokens[t] >= config_.vocab_size) {
            throw std::invalid_argument(fmt::format(
                "forward: token id {} at position {} outside vocabulary of size {}",
                tokens[t], t, config_.vocab_size));
        }
    }

    const std::size_t nt = static_cast<std::size_t>(n);
    const std::size_t d = static_cast<std::size_t>(config_.d_model);
    const std::size_t dh = static_cast<std::size_t>(config_.d_head());
    const std::size_t d3 = 3 * d;
    const std::size_t d4 = 4 * d;
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

    ActivationTrace trace;
    trace.n_tokens = n;
    trace.n_layers = config_.n_layers;
    trace.n_heads = config_.n_heads;
    trace.vocab_size = config_.vocab_size;
    trace.tokens.assign(tokens.begin(), tokens.end());
    trace.logits.resize(nt * static_cast<std::size_t>(config_.vocab_size));
    trace.attentions.assign(static_cast<std::size_t>(config_.n_layers) * config_.n_heads * nt * nt, 0.0f);

    std::vector<float> x(nt * d);
    for (int t = 0; t < n; ++t) {
        const float* tok_emb = wte_.data() + static_cast<std::size_t>(tokens[t]) * d;
        const float* pos_emb = wpe_.data() + static_cast<std::size_t>(t) * d;
        float* dst = x.data() + t * d;
        for (std::size_t i = 0; i < d; ++i) dst[i] = tok_emb[i] + pos_emb[i];
    }

    std::vector<float> norm(nt * d);
    std::vector<float> qkv(nt * d3);
    std::vector<float> attn_mix(nt * d);
    std::vector<float> row_buf(nt * d4);  // reused for scores, proj rows, MLP hidden

    for (int l = 0; l < config_.n_layers; ++l) {
        const LayerWeights& lw = layers_[l];

        for (std::size_t t = 0; t < nt; ++t) {
            K.layer_norm(x.data() + t * d, lw.ln1_w.data(), lw.ln1_b.data(),
                         static_cast<float>(config_.layer_norm_epsilon), norm.data() + t * d, d);
        }
        for (std::size_t t = 0; t < nt; ++t) {
            float* out = qkv.data() + t * d3;
            std::copy(lw.qkv_b.begin(), lw.qkv_b.end(), out);
            const float* in = norm.data() + t * d;
            for (std::size_t k = 0; k < d; ++k) {
                K.axpy(in[k], lw.qkv_w.data() + k * d3, out, d3);
            }
        }

        std::fill(attn_mix.begin(), attn_mix.end(), 0.0f);
        for (int h = 0; h < config_.n_heads; ++h) {
            const std::size_t q_off = static_cast<std::size_t>(h) * dh;
            const std::size_t k_off = d + q_off;
            const std::size_t v_off = 2 * d + q_off;
            float* attn_base = trace.attentions.data() +
                               ((static_cast<std::size_t>(l) * config_.n_heads + h) * nt) * nt;

            for (std::size_t i = 0; i < nt; ++i) {
                float* scores = row_buf.data();
                const float* q = qkv.data() + i * d3 + q_off;
                for (std::size_t j = 0; j <= i; ++j) {
                    scores[j] = K.dot(q, qkv.data() + j * d3 + k_off, dh) * inv_sqrt_dh;
                }
                const std::size_t m = i + 1;
                const float max = K.reduce_max(scores, m);
                for (std::size_t j = 0; j < m; ++j) scores[j] = std::exp(scores[j] - max);
                const float sum = K.reduce_sum(scores, m);
                K.scale(scores, 1.0f / sum, m);

                float* attn_row = attn_base + i * nt;
                std::copy(scores, scores + m, attn_row);  // j > i stays exactly 0

                float* mix = attn_mix.data() + i * d + q_off;
                for (std::size_t j = 0; j < m; ++j) {
                    K.axpy(scores[j], qkv.data() + j * d3 + v_off, mix, dh);
                }
            }
        }

        for (std::size_t t = 0; t < nt; ++t) {
            float* proj = row_buf.data();
            std::copy(lw.attn_proj_b.begin(), lw.attn_proj_b.end(), proj);
            const float* in = attn_mix.data() + t * d;
            for (std::size_t k = 0; k < d; ++k) {
                K.axpy(in[k], lw.attn_proj_w.data() + k * d, proj, d);
            }
            K.add(x.data() + t * d, proj, d);
        }

        for (std::size_t t = 0; t < nt; ++t) {
            K.layer_norm(x.data() + t * d, lw.ln2_w.data(), lw.ln2_b.data(),
                         static_cast<float>(config_.layer_norm_epsilon), norm.data() + t * d, d);
        }
        for (std::size_t t = 0; t < nt; ++t) {
            float* hidden = row_buf.data() + t * d4;
            std::copy(lw.mlp_fc_b.begin(), lw.mlp_fc_b.end(), hidden);
            const float* in = norm.data() + t * d;
            for (std::size_t k = 0; k < d; ++k) {
                K.axpy(in[k], lw.mlp_fc_w.data() + k * d4, hidden, d4);
            }
            gelu_inplace(hidden, d4);
        }
        for (std::size_t t = 0; t < nt; ++t) {
            float* proj = norm.data() + t * d;  // norm is free at this point
            std::copy(lw.mlp_proj_b.begin(), lw.mlp_proj_b.end(), proj);
            const float* hidden = row_buf.data() + t * d4;
            for (std::size_t k = 0; k < d4; ++k) {
                K.axpy(hidden[k], lw.mlp_proj_w.data() + k * d, proj, d);
            }
            K.add(x.data() + t * d, proj, d);
        }
    }

    for (std::size_t t = 0; t < nt; ++t) {
        K.layer_norm(x.data() + t * d, lnf_w_.data(), lnf_b_.data(),
                     static_cast<float>(config_.layer_norm_epsilon), norm.data() + t * d, d);
        float* out = trace.logits.data() + t * static_cast<std::size_t>(config_.vocab_size);
        const float* in = norm.data() + t * d;
        for (int v = 0; v < config_.vocab_size; ++v) {
            out[v] = K.dot(in, wte_.data() + static_cast<std::size_t>(v) * d, d);
        }
    }

    return trace;
}

}  // namespace lmprobe
