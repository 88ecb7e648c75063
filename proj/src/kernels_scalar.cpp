#include "segmix/kernels.hpp"

#include <cstring>

namespace segmix::kern::scalar {

// Reference implementations. The AVX2 variants must match these bitwise:
// keep the lane order (k innermost, ascending) and the operation sequence
// identical when touching either file.

void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out) {
    const int cpad = padded_states(c);
    for (int r = 0; r < data.n_rows; ++r) {
        double* acc = out + static_cast<size_t>(r) * cpad;
        std::memcpy(acc, weights, sizeof(double) * cpad);
        const int16_t* row = data.symbols + static_cast<size_t>(r) * data.len;
        for (int i = 0; i < data.len; ++i) {
            const int v = row[i];
            if (v < 0) continue;
            const double* e =
                emissions + (static_cast<size_t>(i) * data.n_symbols + v) * cpad;
            for (int k = 0; k < cpad; ++k) acc[k] *= e[k];
        }
    }
}

void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums) {
    const int cpad = padded_states(c);
    for (int r = 0; r < data.n_rows; ++r) {
        const double* w = resp + static_cast<size_t>(r) * cpad;
        for (int k = 0; k < cpad; ++k) state_sums[k] += w[k];
        const int16_t* row = data.symbols + static_cast<size_t>(r) * data.len;
        for (int i = 0; i < data.len; ++i) {
            const int v = row[i];
            if (v < 0) continue;
            double* cnt =
                counts + (static_cast<size_t>(i) * data.n_symbols + v) * cpad;
            for (int k = 0; k < cpad; ++k) cnt[k] += w[k];
        }
    }
}

}  // namespace segmix::kern::scalar
