#include "test_support.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#ifndef LMPROBE_SOURCE_ROOT
#define LMPROBE_SOURCE_ROOT "."
#endif

namespace lmprobe::testing {

std::filesystem::path data_root() {
    if (const char* env = std::getenv("LMPROBE_DATA_ROOT")) return env;
    return LMPROBE_SOURCE_ROOT;
}

void write_safetensors(const std::filesystem::path& path,
                       const std::map<std::string, NamedTensor>& tensors) {
    nlohmann::json header = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        const std::uint64_t bytes = tensor.values.size() * 4;
        header[name] = {{"dtype", "F32"},
                        {"shape", tensor.shape},
                        {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    const std::string header_str = header.dump();
    const std::uint64_t header_len = header_str.size();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, tensor] : tensors) {
        out.write(reinterpret_cast<const char*>(tensor.values.data()),
                  static_cast<std::streamsize>(tensor.values.size() * 4));
    }
}

std::map<std::string, NamedTensor> zero_checkpoint_tensors(const ModelConfig& config) {
    const std::int64_t d = config.d_model;
    std::map<std::string, NamedTensor> tensors;
    auto zeros = [](std::vector<std::int64_t> shape) {
        std::size_t n = 1;
        for (auto s : shape) n *= static_cast<std::size_t>(s);
        return NamedTensor{std::move(shape), std::vector<float>(n, 0.0f)};
    };
    auto ones = [&zeros](std::vector<std::int64_t> shape) {
        NamedTensor t = zeros(std::move(shape));
        std::fill(t.values.begin(), t.values.end(), 1.0f);
        return t;
    };

    tensors["wte.weight"] = zeros({config.vocab_size, d});
    tensors["wpe.weight"] = zeros({config.max_context, d});
    for (int l = 0; l < config.n_layers; ++l) {
        const std::string p = "h." + std::to_string(l) + ".";
        tensors[p + "ln_1.weight"] = ones({d});
        tensors[p + "ln_1.bias"] = zeros({d});
        tensors[p + "attn.c_attn.weight"] = zeros({d, 3 * d});
        tensors[p + "attn.c_attn.bias"] = zeros({3 * d});
        tensors[p + "attn.c_proj.weight"] = zeros({d, d});
        tensors[p + "attn.c_proj.bias"] = zeros({d});
        tensors[p + "ln_2.weight"] = ones({d});
        tensors[p + "ln_2.bias"] = zeros({d});
        tensors[p + "mlp.c_fc.weight"] = zeros({d, 4 * d});
        tensors[p + "mlp.c_fc.bias"] = zeros({4 * d});
        tensors[p + "mlp.c_proj.weight"] = zeros({4 * d, d});
        tensors[p + "mlp.c_proj.bias"] = zeros({d});
    }
    tensors["ln_f.weight"] = ones({d});
    tensors["ln_f.bias"] = zeros({d});
    return tensors;
}

ModelConfig planted_config() {
    ModelConfig config;
    config.n_layers = 3;
    config.n_heads = 6;
    config.d_model = 24;
    config.vocab_size = 50257;
    config.max_context = 64;
    return config;
}

std::map<std::string, NamedTensor> planted_checkpoint_tensors(const ModelConfig& config,
                                                              int marker_token, HeadRef head) {
    auto tensors = zero_checkpoint_tensors(config);
    const std::int64_t d = config.d_model;
    const int dh = config.d_head();

    // marker token carries the only nonzero embedding: channel 0
    tensors["wte.weight"].values[static_cast<std::size_t>(marker_token) * d] = 1.0f;

    const std::string p = "h." + std::to_string(head.layer) + ".attn.c_attn.";
    const std::size_t q_col = static_cast<std::size_t>(head.head) * dh;
    const std::size_t k_col = static_cast<std::size_t>(d) + q_col;
    // query: constant via bias; key: channel-0 detector; scores explode only
    // at marker positions, making softmax a one-hot there
    tensors[p + "bias"].values[q_col] = 10.0f;
    tensors[p + "weight"].values[0 * (3 * d) + k_col] = 10.0f;
    return tensors;
}

std::filesystem::path scratch_dir(const std::string& tag) {
    std::filesystem::path base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::filesystem::path dir = base / ("lmprobe_" + tag + "_" + std::to_string(rng()));
        std::error_code ec;
        if (std::filesystem::create_directory(dir, ec)) return dir;
    }
    throw std::runtime_error("cannot create scratch directory");
}

std::vector<float> read_f32_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<float> out(bytes / 4);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    return out;
}

MicroGoldens load_micro_goldens() {
    const auto dir = data_root() / "tests" / "data" / "micro";
    std::ifstream in(dir / "goldens.json");
    if (!in) throw std::runtime_error("missing micro goldens");
    nlohmann::json doc;
    in >> doc;

    MicroGoldens g;
    g.vocab_size = doc.at("vocab_size").get<int>();
    g.attn_sequence_index = doc.at("attn_sequence_index").get<int>();
    g.attn_shape = doc.at("attn_shape").get<std::vector<std::int64_t>>();
    g.attn = read_f32_file(dir / "golden_attn.bin");

    const std::vector<float> all_logits = read_f32_file(dir / "golden_logits.bin");
    std::size_t cursor = 0;
    for (const auto& seq : doc.at("sequences")) {
        MicroGoldens::Sequence s;
        s.ids = seq.at("ids").get<std::vector<int>>();
        s.surprisal_bits = seq.at("surprisal_bits").get<std::vector<double>>();
        const std::size_t n = s.ids.size() * static_cast<std::size_t>(g.vocab_size);
        s.logits.assign(all_logits.begin() + cursor, all_logits.begin() + cursor + n);
        cursor += n;
        g.sequences.push_back(std::move(s));
    }
    if (cursor != all_logits.size()) throw std::runtime_error("micro goldens logits size mismatch");
    return g;
}

RefSmallGoldens load_ref_small_goldens() {
    const auto dir = data_root() / "tests" / "data" / "ref_small";
    std::ifstream in(dir / "goldens.json");
    if (!in) throw std::runtime_error("missing ref_small goldens");
    nlohmann::json doc;
    in >> doc;

    RefSmallGoldens g;
    g.sample_indices = doc.at("sample_indices").get<std::vector<int>>();
    const std::vector<float> all = read_f32_file(dir / "golden_sampled_logits.bin");
    std::size_t cursor = 0;
    for (const auto& sent : doc.at("sentences")) {
        RefSmallGoldens::Sentence s;
        s.text = sent.at("text").get<std::string>();
        s.ids = sent.at("ids").get<std::vector<int>>();
        s.surprisal_bits = sent.at("surprisal_bits").get<std::vector<double>>();
        s.argmax = sent.at("argmax").get<std::vector<int>>();
        const std::size_t n = s.ids.size() * g.sample_indices.size();
        s.sampled_logits.assign(all.begin() + cursor, all.begin() + cursor + n);
        cursor += n;
        g.sentences.push_back(std::move(s));
    }
    if (cursor != all.size()) throw std::runtime_error("ref_small goldens logits size mismatch");
    return g;
}

}  // namespace lmprobe::testing
