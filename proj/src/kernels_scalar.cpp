#include "lmprobe/kernels.hpp"

#include <cmath>

namespace lmprobe::kern {

namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(float* y, const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale_scalar(float* x, float s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

float reduce_max_scalar(const float* x, std::size_t n) {
    float m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

float reduce_sum_scalar(const float* x, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void layer_norm_scalar(const float* x, const float* gamma, const float* beta,
                       float eps, float* out, std::size_t n) {
    float mean = reduce_sum_scalar(x, n) / static_cast<float>(n);
    float var = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        float d = x[i] - mean;
        var += d * d;
    }
    var /= static_cast<float>(n);
    float inv = 1.0f / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar",
        dot_scalar,
        axpy_scalar,
        add_scalar,
        scale_scalar,
        reduce_max_scalar,
        reduce_sum_scalar,
        layer_norm_scalar,
    };
    return k;
}

}  // namespace lmprobe::kern
