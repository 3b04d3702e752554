#include "lmprobe/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace lmprobe::kern {

const Kernels* avx2_kernels_impl();
const Kernels* neon_kernels_impl();

const Kernels* avx2_kernels() {
#if defined(__x86_64__) || defined(__i386__)
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) {
        return nullptr;
    }
#endif
    return avx2_kernels_impl();
}

const Kernels* neon_kernels() { return neon_kernels_impl(); }

namespace {

const Kernels* pick(const std::string& name) {
    if (name == "scalar") return &scalar_kernels();
    if (name == "avx2") return avx2_kernels();
    if (name == "neon") return neon_kernels();
    if (name == "auto" || name.empty()) {
        if (const Kernels* k = avx2_kernels()) return k;
        if (const Kernels* k = neon_kernels()) return k;
        return &scalar_kernels();
    }
    return nullptr;
}

std::atomic<const Kernels*> g_active{nullptr};

}  // namespace

void force_kernels(const char* name) {
    const Kernels* k = pick(name ? name : "auto");
    if (k == nullptr) {
        throw std::runtime_error("kernel set '" + std::string(name) +
                                 "' is unknown or unsupported on this CPU");
    }
    g_active.store(k, std::memory_order_release);
}

const Kernels& active_kernels() {
    const Kernels* k = g_active.load(std::memory_order_acquire);
    if (k == nullptr) {
        const char* env = std::getenv("LMPROBE_KERNELS");
        k = pick(env ? env : "auto");
        if (k == nullptr) k = &scalar_kernels();  // bad env value: fall back
        g_active.store(k, std::memory_order_release);
    }
    return *k;
}

}  // namespace lmprobe::kern
