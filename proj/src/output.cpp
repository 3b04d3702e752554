#include "lmprobe/output.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

namespace lmprobe {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open '{}' for digest", path.string()));
    }
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 init failed");
    }
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string csv_number(double value) {
    if (std::isnan(value)) return "";
    return fmt::format("{:.9g}", value);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), n_columns_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_) {
        throw std::logic_error(fmt::format("csv row has {} cells, expected {}",
                                           cells.size(), n_columns_));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        const std::string& cell = cells[i];
        if (cell.find_first_of(",\"\n") != std::string::npos) {
            buffer_ += '"';
            for (char c : cell) {
                if (c == '"') buffer_ += '"';
                buffer_ += c;
            }
            buffer_ += '"';
        } else {
            buffer_ += cell;
        }
    }
    buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
    std::ofstream out(path_, std::ios::binary);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
}

void RunManifest::write(const std::filesystem::path& path) const {
    nlohmann::json doc;
    doc["tool"] = kToolName;
    doc["version"] = kToolVersion;
    doc["command"] = command;
    doc["timestamp_utc"] =
        fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                 std::chrono::system_clock::now())));
    doc["flags"] = flags;
    if (!checkpoint_path.empty()) {
        doc["checkpoint"] = {{"path", checkpoint_path}, {"sha256", checkpoint_sha256}};
    }
    if (!config_echo.is_null()) doc["config"] = config_echo;
    auto inputs = nlohmann::json::array();
    for (const auto& [p, digest] : input_digests) {
        inputs.push_back({{"path", p}, {"sha256", digest}});
    }
    doc["inputs"] = inputs;
    for (const auto& [key, value] : extra.items()) doc[key] = value;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write manifest '{}'", path.string()));
    }
    out << doc.dump(2) << "\n";
}

}  // namespace lmprobe
