#include "lmprobe/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts are unsupported");

namespace lmprobe {

namespace {

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += (i ? ", " : "") + std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "F32" || dtype == "I32" || dtype == "U32") return 4;
    if (dtype == "F16" || dtype == "BF16" || dtype == "I16" || dtype == "U16") return 2;
    if (dtype == "F64" || dtype == "I64" || dtype == "U64") return 8;
    if (dtype == "I8" || dtype == "U8" || dtype == "BOOL") return 1;
    return 0;  // unknown; only an error if someone reads the tensor
}

}  // namespace

float f16_to_f32(std::uint16_t bits) {
    const std::uint32_t sign = (bits & 0x8000u) << 16;
    std::uint32_t exp = (bits >> 10) & 0x1Fu;
    std::uint32_t mant = bits & 0x3FFu;
    std::uint32_t out;
    if (exp == 0) {
        if (mant == 0) {
            out = sign;
        } else {
            // subnormal: renormalize
            int shift = 0;
            while ((mant & 0x400u) == 0) {
                mant <<= 1;
                ++shift;
            }
            mant &= 0x3FFu;
            out = sign | ((127 - 15 - shift + 1) << 23) | (mant << 13);
        }
    } else if (exp == 0x1Fu) {
        out = sign | 0x7F800000u | (mant << 13);
    } else {
        out = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(out);
}

SafetensorsFile::SafetensorsFile(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open checkpoint '{}'", path.string()));
    }
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);
    if (file_size < 8) {
        throw std::runtime_error(fmt::format("'{}' is not a tensor archive (too short)", path.string()));
    }

    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (header_len > file_size - 8) {
        throw std::runtime_error(
            fmt::format("'{}' header length {} exceeds file size {}", path.string(), header_len, file_size));
    }

    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("'{}' has an unreadable tensor header: {}", path.string(), e.what()));
    }
    if (!doc.is_object()) {
        throw std::runtime_error(fmt::format("'{}' tensor header is not a JSON object", path.string()));
    }

    const std::uint64_t payload_size = file_size - 8 - header_len;
    payload_.resize(payload_size);
    in.read(reinterpret_cast<char*>(payload_.data()), static_cast<std::streamsize>(payload_size));
    if (!in) {
        throw std::runtime_error(fmt::format("failed reading tensor payload of '{}'", path.string()));
    }

    for (const auto& [name, entry] : doc.items()) {
        if (name == "__metadata__") continue;
        TensorInfo ti;
        try {
            ti.dtype = entry.at("dtype").get<std::string>();
            ti.shape = entry.at("shape").get<std::vector<std::int64_t>>();
            const auto& off = entry.at("data_offsets");
            ti.begin = off.at(0).get<std::uint64_t>();
            ti.end = off.at(1).get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format("tensor '{}' in '{}' has a malformed header entry: {}",
                                                 name, path.string(), e.what()));
        }
        if (ti.end < ti.begin || ti.end > payload_size) {
            throw std::runtime_error(fmt::format("tensor '{}' offsets [{}, {}) exceed payload size {}",
                                                 name, ti.begin, ti.end, payload_size));
        }
        std::uint64_t numel = 1;
        for (std::int64_t d : ti.shape) {
            if (d < 0) throw std::runtime_error(fmt::format("tensor '{}' has a negative dimension", name));
            numel *= static_cast<std::uint64_t>(d);
        }
        const std::size_t esize = dtype_size(ti.dtype);
        if (esize != 0 && numel * esize != ti.end - ti.begin) {
            throw std::runtime_error(
                fmt::format("tensor '{}' byte span {} does not match shape {} of dtype {}",
                            name, ti.end - ti.begin, shape_str(ti.shape), ti.dtype));
        }
        tensors_.emplace(name, std::move(ti));
    }
}

bool SafetensorsFile::contains(const std::string& name) const {
    return tensors_.count(name) != 0;
}

const SafetensorsFile::TensorInfo& SafetensorsFile::info(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw std::runtime_error(fmt::format("checkpoint '{}' is missing tensor '{}'", path_.string(), name));
    }
    return it->second;
}

std::vector<std::string> SafetensorsFile::names() const {
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [name, ti] : tensors_) out.push_back(name);
    return out;
}

std::vector<float> SafetensorsFile::read_f32(const std::string& name,
                                             const std::vector<std::int64_t>& expected_shape) const {
    const TensorInfo& ti = info(name);
    if (ti.shape != expected_shape) {
        throw std::runtime_error(fmt::format("tensor '{}' has shape {}, expected {}",
                                             name, shape_str(ti.shape), shape_str(expected_shape)));
    }
    std::uint64_t numel = 1;
    for (std::int64_t d : ti.shape) numel *= static_cast<std::uint64_t>(d);

    std::vector<float> out(numel);
    const std::uint8_t* src = payload_.data() + ti.begin;
    if (ti.dtype == "F32") {
        std::memcpy(out.data(), src, numel * 4);
    } else if (ti.dtype == "F16") {
        for (std::uint64_t i = 0; i < numel; ++i) {
            std::uint16_t h;
            std::memcpy(&h, src + i * 2, 2);
            out[i] = f16_to_f32(h);
        }
    } else {
        throw std::runtime_error(
            fmt::format("tensor '{}' has dtype {}; expected F32 or F16", name, ti.dtype));
    }
    return out;
}

}  // namespace lmprobe
