#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lmprobe {

// Reader for named-tensor archives: 8-byte little-endian header length,
// JSON header mapping tensor name -> {dtype, shape, data_offsets}, then the
// raw little-endian payload.
class SafetensorsFile {
public:
    struct TensorInfo {
        std::string dtype;
        std::vector<std::int64_t> shape;
        std::uint64_t begin = 0;  // offsets into the payload
        std::uint64_t end = 0;
    };

    explicit SafetensorsFile(const std::filesystem::path& path);

    bool contains(const std::string& name) const;
    const TensorInfo& info(const std::string& name) const;
    std::vector<std::string> names() const;

    // Reads a tensor as 32-bit floats, widening F16 payloads. The shape must
    // match exactly; errors name the tensor and both shapes.
    std::vector<float> read_f32(const std::string& name,
                                const std::vector<std::int64_t>& expected_shape) const;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::vector<std::uint8_t> payload_;
    std::map<std::string, TensorInfo> tensors_;
};

float f16_to_f32(std::uint16_t bits);

}  // namespace lmprobe
