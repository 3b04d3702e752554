// NEON variants for aarch64 builds; mirrors the scalar semantics.

#include "lmprobe/kernels.hpp"

#if defined(__ARM_NEON) || defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

namespace lmprobe::kern {

namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
    float32x4_t acc0 = vdupq_n_f32(0.0f);
    float32x4_t acc1 = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
        acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    }
    float acc = vaddvq_f32(vaddq_f32(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_neon(float a, const float* x, float* y, std::size_t n) {
    float32x4_t va = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_neon(float* y, const float* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void scale_neon(float* x, float s, std::size_t n) {
    float32x4_t vs = vdupq_n_f32(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(x + i, vmulq_f32(vld1q_f32(x + i), vs));
    }
    for (; i < n; ++i) x[i] *= s;
}

float reduce_max_neon(const float* x, std::size_t n) {
    std::size_t i = 0;
    float m;
    if (n >= 4) {
        float32x4_t vm = vld1q_f32(x);
        for (i = 4; i + 4 <= n; i += 4) vm = vmaxq_f32(vm, vld1q_f32(x + i));
        m = vmaxvq_f32(vm);
    } else {
        m = x[0];
        i = 1;
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

float reduce_sum_neon(const float* x, std::size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void layer_norm_neon(const float* x, const float* gamma, const float* beta,
                     float eps, float* out, std::size_t n) {
    float mean = reduce_sum_neon(x, n) / static_cast<float>(n);
    float32x4_t vmean = vdupq_n_f32(mean);
    float32x4_t vacc = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t d = vsubq_f32(vld1q_f32(x + i), vmean);
        vacc = vfmaq_f32(vacc, d, d);
    }
    float var = vaddvq_f32(vacc);
    for (; i < n; ++i) {
        float d = x[i] - mean;
        var += d * d;
    }
    var /= static_cast<float>(n);
    float inv = 1.0f / std::sqrt(var + eps);
    float32x4_t vinv = vdupq_n_f32(inv);
    for (i = 0; i + 4 <= n; i += 4) {
        float32x4_t t = vmulq_f32(vsubq_f32(vld1q_f32(x + i), vmean), vinv);
        vst1q_f32(out + i, vfmaq_f32(vld1q_f32(beta + i), t, vld1q_f32(gamma + i)));
    }
    for (; i < n; ++i) {
        out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    }
}

}  // namespace

const Kernels* neon_kernels_impl() {
    static const Kernels k = {
        "neon",
        dot_neon,
        axpy_neon,
        add_neon,
        scale_neon,
        reduce_max_neon,
        reduce_sum_neon,
        layer_norm_neon,
    };
    return &k;
}

}  // namespace lmprobe::kern

#else

namespace lmprobe::kern {
const Kernels* neon_kernels_impl() { return nullptr; }
}  // namespace lmprobe::kern

#endif
