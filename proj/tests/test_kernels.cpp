#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lmprobe/kernels.hpp"

using lmprobe::kern::Kernels;

namespace {

std::vector<float> random_vec(std::mt19937& rng, std::size_t n, float lo = -2.0f, float hi = 2.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (float& x : v) x = dist(rng);
    return v;
}

// sizes straddling the 8- and 16-lane boundaries plus odd tails
const std::size_t kSizes[] = {1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 64, 100, 768, 1001};

void check_equivalence(const Kernels& ref, const Kernels& simd) {
    std::mt19937 rng(42);
    for (std::size_t n : kSizes) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);

            const float d_ref = ref.dot(a.data(), b.data(), n);
            const float d_simd = simd.dot(a.data(), b.data(), n);
            CHECK(d_simd == doctest::Approx(d_ref).epsilon(1e-4).scale(1.0));

            auto y_ref = random_vec(rng, n);
            auto y_simd = y_ref;
            ref.axpy(0.37f, a.data(), y_ref.data(), n);
            simd.axpy(0.37f, a.data(), y_simd.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(y_simd[i] == doctest::Approx(y_ref[i]).epsilon(1e-5).scale(1.0));
            }

            auto z_ref = y_ref;
            auto z_simd = y_ref;
            ref.add(z_ref.data(), b.data(), n);
            simd.add(z_simd.data(), b.data(), n);
            CHECK(z_ref == z_simd);  // pure elementwise adds are bit-equal

            auto s_ref = z_ref;
            auto s_simd = z_ref;
            ref.scale(s_ref.data(), 1.7f, n);
            simd.scale(s_simd.data(), 1.7f, n);
            CHECK(s_ref == s_simd);

            CHECK(simd.reduce_max(a.data(), n) == ref.reduce_max(a.data(), n));
            CHECK(simd.reduce_sum(a.data(), n) ==
                  doctest::Approx(ref.reduce_sum(a.data(), n)).epsilon(1e-4).scale(1.0));

            std::vector<float> gamma = random_vec(rng, n, 0.5f, 1.5f);
            std::vector<float> beta = random_vec(rng, n, -0.5f, 0.5f);
            std::vector<float> out_ref(n), out_simd(n);
            ref.layer_norm(a.data(), gamma.data(), beta.data(), 1e-5f, out_ref.data(), n);
            simd.layer_norm(a.data(), gamma.data(), beta.data(), 1e-5f, out_simd.data(), n);
            for (std::size_t i = 0; i < n; ++i) {
                // outputs are O(1); near-zero entries carry cancellation noise
                CHECK(std::abs(out_simd[i] - out_ref[i]) < 1e-5f);
            }
        }
    }
}

}  // namespace

TEST_CASE("scalar kernels agree with straightforward math") {
    const Kernels& k = lmprobe::kern::scalar_kernels();
    std::mt19937 rng(7);
    for (std::size_t n : kSizes) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);

        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += double(a[i]) * double(b[i]);
        CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-4).scale(1.0));

        CHECK(k.reduce_max(a.data(), n) == *std::max_element(a.begin(), a.end()));
        const double sum = std::accumulate(a.begin(), a.end(), 0.0);
        CHECK(k.reduce_sum(a.data(), n) == doctest::Approx(sum).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("scalar layer norm centers and scales") {
    const Kernels& k = lmprobe::kern::scalar_kernels();
    std::mt19937 rng(11);
    const std::size_t n = 64;
    const auto x = random_vec(rng, n);
    std::vector<float> gamma(n, 1.0f), beta(n, 0.0f), out(n);
    k.layer_norm(x.data(), gamma.data(), beta.data(), 1e-5f, out.data(), n);

    double mean = 0.0, var = 0.0;
    for (float v : out) mean += v;
    mean /= n;
    for (float v : out) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("avx2 kernels match the scalar reference") {
    const Kernels* simd = lmprobe::kern::avx2_kernels();
    if (simd == nullptr) {
        MESSAGE("AVX2 unavailable on this CPU; skipping");
        return;
    }
    check_equivalence(lmprobe::kern::scalar_kernels(), *simd);
}

TEST_CASE("neon kernels match the scalar reference") {
    const Kernels* simd = lmprobe::kern::neon_kernels();
    if (simd == nullptr) {
        MESSAGE("NEON unavailable on this CPU; skipping");
        return;
    }
    check_equivalence(lmprobe::kern::scalar_kernels(), *simd);
}

TEST_CASE("kernel selection honors force_kernels") {
    lmprobe::kern::force_kernels("scalar");
    CHECK(std::string(lmprobe::kern::active_kernels().name) == "scalar");
    lmprobe::kern::force_kernels("auto");
    CHECK_THROWS(lmprobe::kern::force_kernels("sse9"));
}
