#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lmprobe {

// An ungrammatical agreement sentence with number annotations supplied by
// the corpus, never inferred from text.
struct AnnotatedAgreementSentence {
    std::string text;
    std::string subject_number;  // "sg" | "pl"
    std::string verb_number;     // opposite of subject_number by construction
    std::vector<std::string> intervening_distractor_numbers;
};

enum class InterferenceClass { Interfering, NonInterfering, Excluded };

// Interfering when any intervening distractor matches the verb's number;
// excluded when there is no distractor at all.
InterferenceClass classify(const AnnotatedAgreementSentence& sentence);

struct AgreementCounts {
    // [subject sg|pl][interfering|non-interfering]
    std::array<std::array<std::size_t, 2>, 2> table = {{{0, 0}, {0, 0}}};
    std::size_t excluded = 0;

    std::size_t sg_interfering() const { return table[0][0]; }
    std::size_t sg_non_interfering() const { return table[0][1]; }
    std::size_t pl_interfering() const { return table[1][0]; }
    std::size_t pl_non_interfering() const { return table[1][1]; }
    std::size_t total_counted() const;
    double ratio(const std::string& subject_number) const;  // interfering : non-interfering
};

AgreementCounts count_patterns(std::span<const AnnotatedAgreementSentence> sentences);

std::vector<AnnotatedAgreementSentence> read_agreement_jsonl(const std::filesystem::path& path);

}  // namespace lmprobe
