#include "segmix/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace segmix::kern {

const char* backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool avx2_available() {
#if defined(SEGMIX_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

Backend pick_default() {
    if (const char* env = std::getenv("SEGMIX_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::Avx2;
    }
    return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend> g_backend{pick_default()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_available()) b = Backend::Scalar;
    g_backend.store(b, std::memory_order_relaxed);
}

void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out) {
#ifdef SEGMIX_HAVE_AVX2
    if (active_backend() == Backend::Avx2) {
        avx2::estep_products(data, weights, emissions, c, out);
        return;
    }
#endif
    scalar::estep_products(data, weights, emissions, c, out);
}

void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums) {
#ifdef SEGMIX_HAVE_AVX2
    if (active_backend() == Backend::Avx2) {
        avx2::mstep_accumulate(data, resp, c, counts, state_sums);
        return;
    }
#endif
    scalar::mstep_accumulate(data, resp, c, counts, state_sums);
}

}  // namespace segmix::kern
