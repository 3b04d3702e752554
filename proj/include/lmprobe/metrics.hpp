#pragma once

#include <optional>

#include "lmprobe/model.hpp"
#include "lmprobe/tokenizer.hpp"

namespace lmprobe {

struct HeadRef {
    int layer = 0;
    int head = 0;
};

// Token-index view of a marked stimulus region. Target and distractor,
// when present, precede the critical region.
struct CriticalRegion {
    TokenRange critical;
    std::optional<TokenRange> target;
    std::optional<TokenRange> distractor;
};

// Summed over the region's subtokens: -log2 P(token | left context).
// The region's first token needs at least one preceding token.
double surprisal_bits(const ActivationTrace& trace, TokenRange region);

// -sum_{j<i} a_j * log2(a_j) over the head's attention row at position i,
// with 0*log(0) = 0; the self term is excluded and the remaining mass is
// not renormalized.
double attention_entropy_bits(const ActivationTrace& trace, HeadRef head, int position);

// Attention mass the row at `position` assigns to the target's subtokens.
double attention_to_target(const ActivationTrace& trace, HeadRef head, int position,
                           TokenRange target);

}  // namespace lmprobe
