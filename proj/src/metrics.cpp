#include "lmprobe/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace lmprobe {

namespace {

void check_region(const ActivationTrace& trace, TokenRange region) {
    if (region.first < 0 || region.last > trace.n_tokens || region.size() <= 0) {
        throw std::out_of_range(fmt::format("token range [{}, {}) invalid for trace of {} tokens",
                                            region.first, region.last, trace.n_tokens));
    }
}

}  // namespace

double surprisal_bits(const ActivationTrace& trace, TokenRange region) {
    check_region(trace, region);
    if (region.first == 0) {
        throw std::invalid_argument("surprisal undefined at sentence start: no left context");
    }
    constexpr double kLn2 = 0.6931471805599453;
    double total = 0.0;
    for (int p = region.first; p < region.last; ++p) {
        auto row = trace.logits_row(p - 1);
        double max = row[0];
        for (float v : row) max = std::max(max, static_cast<double>(v));
        double sum = 0.0;
        for (float v : row) sum += std::exp(static_cast<double>(v) - max);
        const double logprob = static_cast<double>(row[trace.tokens[p]]) - max - std::log(sum);
        total -= logprob / kLn2;
    }
    return total;
}

double attention_entropy_bits(const ActivationTrace& trace, HeadRef head, int position) {
    if (position < 1) {
        throw std::invalid_argument("attention entropy undefined at position 0: no prior tokens");
    }
    auto row = trace.attention_row(head.layer, head.head, position);
    double acc = 0.0;
    for (int j = 0; j < position; ++j) {
        const double a = row[static_cast<std::size_t>(j)];
        if (a > 0.0) acc -= a * std::log2(a);
    }
    return acc;
}

double attention_to_target(const ActivationTrace& trace, HeadRef head, int position,
                           TokenRange target) {
    check_region(trace, target);
    if (target.last > position) {
        throw std::invalid_argument(fmt::format(
            "target tokens [{}, {}) must precede position {}", target.first, target.last, position));
    }
    auto row = trace.attention_row(head.layer, head.head, position);
    double acc = 0.0;
    for (int j = target.first; j < target.last; ++j) {
        acc += row[static_cast<std::size_t>(j)];
    }
    return acc;
}

}  // namespace lmprobe
