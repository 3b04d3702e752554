#pragma once

#include <cstddef>

namespace lmprobe::kern {

// Data-parallel primitives used by the forward pass. Every entry has a
// scalar reference implementation; SIMD variants are selected at runtime
// and must agree with the reference within floating-point reassociation.
struct Kernels {
    const char* name;

    float (*dot)(const float* a, const float* b, std::size_t n);
    void (*axpy)(float a, const float* x, float* y, std::size_t n);  // y += a*x
    void (*add)(float* y, const float* x, std::size_t n);            // y += x
    void (*scale)(float* x, float s, std::size_t n);                 // x *= s
    float (*reduce_max)(const float* x, std::size_t n);              // n >= 1
    float (*reduce_sum)(const float* x, std::size_t n);

    // out = (x - mean(x)) / sqrt(var(x) + eps) * gamma + beta, biased variance
    void (*layer_norm)(const float* x, const float* gamma, const float* beta,
                       float eps, float* out, std::size_t n);
};

const Kernels& scalar_kernels();

// nullptr when the CPU (or build target) lacks the instruction set.
const Kernels* avx2_kernels();
const Kernels* neon_kernels();

// Runtime selection: best available unless overridden by force_kernels()
// or the LMPROBE_KERNELS environment variable (scalar|avx2|neon|auto).
const Kernels& active_kernels();
void force_kernels(const char* name);

}  // namespace lmprobe::kern
