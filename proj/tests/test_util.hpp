#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "segmix/dataset.hpp"
#include "segmix/rng.hpp"
#include "segmix/segment_dp.hpp"

namespace segmix::test {

// Builds a dataset from row strings, e.g. {"AB?", "ABA"} with missing '?'.
// The alphabet is fixed explicitly so single-symbol columns keep A >= 2.
inline AlignedDataset make_dataset(const std::vector<std::string>& rows,
                                   const std::string& alphabet_chars = "AB",
                                   char missing = '?') {
    std::vector<std::string> symbols;
    for (char ch : alphabet_chars) symbols.emplace_back(1, ch);
    ParseOptions opts;
    opts.missing_token = std::string(1, missing);
    opts.alphabet = Alphabet(symbols);
    std::ostringstream text;
    for (const auto& row : rows) text << row << '\n';
    std::istringstream in(text.str());
    return parse_alignment(in, TextFormat::Matrix, opts);
}

// Fully scored table with uniform scores in [lo, hi).
inline ScoreTable random_table(int L, int Lmax, int Cmax, uint64_t seed,
                               double lo = -15.0, double hi = 5.0) {
    ScoreTable table(L, Lmax, Cmax, ScoreKind::CV, seed, 0);
    Rng rng(seed);
    for (int s = 0; s < L; ++s)
        for (int l = 1; l <= Lmax && s + l <= L; ++l)
            for (int c = (l == 1 ? 1 : 2); c <= (l == 1 ? 1 : Cmax); ++c)
                table.set_scored(s, l, c, lo + (hi - lo) * rng.next_double());
    return table;
}

// Exhaustive maximum over every boundary pattern and per-segment cardinality
// choice; independent of the DP implementation.
inline double brute_force_best(const ScoreTable& table) {
    const int L = table.L();
    double best = -std::numeric_limits<double>::infinity();
    for (uint32_t mask = 0; mask < (1u << (L - 1)); ++mask) {
        double total = 0.0;
        bool feasible = true;
        int start = 0;
        for (int i = 0; i < L; ++i) {
            const bool boundary = i == L - 1 || (mask >> i) & 1u;
            if (!boundary) continue;
            const int len = i - start + 1;
            if (len > table.Lmax()) {
                feasible = false;
                break;
            }
            double seg_best = -std::numeric_limits<double>::infinity();
            if (len == 1) {
                seg_best = table.value(start, 1, 1);
            } else {
                for (int c = 2; c <= table.Cmax(); ++c)
                    seg_best = std::max(seg_best, table.value(start, len, c));
            }
            total += seg_best;
            start = i + 1;
        }
        if (feasible) best = std::max(best, total);
    }
    return best;
}

}  // namespace segmix::test
