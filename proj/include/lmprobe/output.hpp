#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lmprobe {

inline constexpr const char* kToolName = "lmprobe";
inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_file(const std::filesystem::path& path);

// Deterministic float formatting for result files ("%.9g"; NaN -> empty).
std::string csv_number(double value);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    ~CsvWriter();

private:
    std::string buffer_;
    std::filesystem::path path_;
    std::size_t n_columns_;
};

// Every command writes one of these next to its result files; equal inputs
// and flags imply byte-identical result CSVs.
struct RunManifest {
    std::string command;
    nlohmann::json flags = nlohmann::json::object();
    std::string checkpoint_path;
    std::string checkpoint_sha256;
    nlohmann::json config_echo;
    std::vector<std::pair<std::string, std::string>> input_digests;  // path, sha256
    nlohmann::json extra = nlohmann::json::object();

    void write(const std::filesystem::path& path) const;
};

}  // namespace lmprobe
