#pragma once

#include <cstdint>
#include <string>

namespace segmix::kern {

// The two hot loops of EM over a segment, vectorized along the hidden-state
// axis. State vectors are padded to kStateAlign lanes; both backends perform
// the same lanewise operations in the same order, so a given input produces
// bitwise-identical output regardless of the selected backend. All
// transcendental math (log, exp, normalization) stays outside the kernels in
// shared scalar code.

inline constexpr int kStateAlign = 4;  // AVX2: 4 doubles per register

inline int padded_states(int c) {
    return ((c + kStateAlign - 1) / kStateAlign) * kStateAlign;
}

// Segment-local window of the training rows. symbols[r * len + i] is the
// alphabet index at span offset i of row r, or -1 if missing.
struct SpanView {
    const int16_t* symbols = nullptr;
    int n_rows = 0;
    int len = 0;
    int n_symbols = 0;
};

// E-step products. For each row r and state k < c:
//   out[r*cpad + k] = weights[k] * prod over observed i of
//                     emissions[(i*n_symbols + v_i)*cpad + k]
// weights and emissions are padded to cpad = padded_states(c); padding lanes
// of weights must be 0 so padded lanes stay 0.
void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out);

// M-step accumulation. For each row r: state_sums[k] += resp[r*cpad + k], and
// for each observed position i with symbol v:
//   counts[(i*n_symbols + v)*cpad + k] += resp[r*cpad + k].
// counts and state_sums must be zeroed by the caller; resp padding lanes must
// be 0.
void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums);

enum class Backend { Scalar, Avx2 };

const char* backend_name(Backend b);

// Selected at startup: AVX2 when compiled in and supported by the CPU, unless
// overridden by set_backend() or the SEGMIX_KERNEL environment variable
// ("scalar" or "avx2").
Backend active_backend();
void set_backend(Backend b);
bool avx2_available();

// Direct entry points for equivalence tests.
namespace scalar {
void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out);
void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums);
}  // namespace scalar

#ifdef SEGMIX_HAVE_AVX2
namespace avx2 {
void estep_products(const SpanView& data, const double* weights,
                    const double* emissions, int c, double* out);
void mstep_accumulate(const SpanView& data, const double* resp, int c,
                      double* counts, double* state_sums);
}  // namespace avx2
#endif

}  // namespace segmix::kern
