#include "lmprobe/corpus_counter.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace lmprobe {

namespace {

void check_number(const std::string& value, const char* field, const std::string& text) {
    if (value != "sg" && value != "pl") {
        throw std::runtime_error(fmt::format("sentence '{}': {} must be sg|pl, got '{}'",
                                             text, field, value));
    }
}

}  // namespace

InterferenceClass classify(const AnnotatedAgreementSentence& s) {
    check_number(s.subject_number, "subject_number", s.text);
    check_number(s.verb_number, "verb_number", s.text);
    if (s.subject_number == s.verb_number) {
        throw std::runtime_error(fmt::format(
            "sentence '{}': subject and verb agree in number; not an ungrammatical agreement sentence",
            s.text));
    }
    if (s.intervening_distractor_numbers.empty()) return InterferenceClass::Excluded;
    for (const std::string& d : s.intervening_distractor_numbers) {
        check_number(d, "distractor number", s.text);
        if (d == s.verb_number) return InterferenceClass::Interfering;
    }
    return InterferenceClass::NonInterfering;
}

std::size_t AgreementCounts::total_counted() const {
    return table[0][0] + table[0][1] + table[1][0] + table[1][1];
}

double AgreementCounts::ratio(const std::string& subject_number) const {
    const auto& row = table[subject_number == "sg" ? 0 : 1];
    if (row[1] == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(row[0]) / static_cast<double>(row[1]);
}

AgreementCounts count_patterns(std::span<const AnnotatedAgreementSentence> sentences) {
    AgreementCounts counts;
    for (const AnnotatedAgreementSentence& s : sentences) {
        const InterferenceClass cls = classify(s);
        if (cls == InterferenceClass::Excluded) {
            ++counts.excluded;
            continue;
        }
        const std::size_t row = s.subject_number == "sg" ? 0 : 1;
        const std::size_t col = cls == InterferenceClass::Interfering ? 0 : 1;
        ++counts.table[row][col];
    }
    return counts;
}

std::vector<AnnotatedAgreementSentence> read_agreement_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open agreement corpus '{}'", path.string()));
    }
    std::vector<AnnotatedAgreementSentence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format("'{}' line {}: malformed JSON: {}",
                                                 path.string(), line_no, e.what()));
        }
        AnnotatedAgreementSentence s;
        try {
            s.text = doc.at("text").get<std::string>();
            s.subject_number = doc.at("subject_number").get<std::string>();
            s.verb_number = doc.at("verb_number").get<std::string>();
            s.intervening_distractor_numbers =
                doc.at("distractor_numbers").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(fmt::format(
                "'{}' line {}: expected text/subject_number/verb_number/distractor_numbers: {}",
                path.string(), line_no, e.what()));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace lmprobe
