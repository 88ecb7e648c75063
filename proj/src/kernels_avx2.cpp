#include "segmix/kernels.hpp"

#ifdef SEGMIX_HAVE_AVX2

#ifndef __AVX2__
#error "kernels_avx2.cpp must be compiled with -mavx2"
#endif

#include <immintrin.h>

#include <cstring>

namespace segmix::kern::avx2 {

// Lanewise mirror of the scalar kernels: plain mul/add only (no FMA), state
// lanes processed in the same ascending order, so outputs are bitwise equal
// to the scalar backend.

void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out) {
    const int cpad = padded_states(c);
    const int blocks = cpad / kStateAlign;
    for (int r = 0; r < data.n_rows; ++r) {
        double* acc = out + static_cast<size_t>(r) * cpad;
        std::memcpy(acc, weights, sizeof(double) * cpad);
        const int16_t* row = data.symbols + static_cast<size_t>(r) * data.len;
        for (int i = 0; i < data.len; ++i) {
            const int v = row[i];
            if (v < 0) continue;
            const double* e =
                emissions + (static_cast<size_t>(i) * data.n_symbols + v) * cpad;
            for (int b = 0; b < blocks; ++b) {
                __m256d a = _mm256_loadu_pd(acc + 4 * b);
                __m256d m = _mm256_loadu_pd(e + 4 * b);
                _mm256_storeu_pd(acc + 4 * b, _mm256_mul_pd(a, m));
            }
        }
    }
}

void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums) {
    const int cpad = padded_states(c);
    const int blocks = cpad / kStateAlign;
    for (int r = 0; r < data.n_rows; ++r) {
        const double* w = resp + static_cast<size_t>(r) * cpad;
        for (int b = 0; b < blocks; ++b) {
            __m256d s = _mm256_loadu_pd(state_sums + 4 * b);
            __m256d x = _mm256_loadu_pd(w + 4 * b);
            _mm256_storeu_pd(state_sums + 4 * b, _mm256_add_pd(s, x));
        }
        const int16_t* row = data.symbols + static_cast<size_t>(r) * data.len;
        for (int i = 0; i < data.len; ++i) {
            const int v = row[i];
            if (v < 0) continue;
            double* cnt =
                counts + (static_cast<size_t>(i) * data.n_symbols + v) * cpad;
            for (int b = 0; b < blocks; ++b) {
                __m256d s = _mm256_loadu_pd(cnt + 4 * b);
                __m256d x = _mm256_loadu_pd(w + 4 * b);
                _mm256_storeu_pd(cnt + 4 * b, _mm256_add_pd(s, x));
            }
        }
    }
}

}  // namespace segmix::kern::avx2

#endif  // SEGMIX_HAVE_AVX2
