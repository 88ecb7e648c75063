#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segmix/mixture.hpp"

namespace segmix {

enum class ScoreKind { BIC, CS, CV };

std::string to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);

struct ScoreConfig {
    DirichletPrior prior;
    int restarts = 10;
    int max_iterations = 500;
    double tolerance = 1e-6;
    uint64_t seed = 0;
    int cv_folds = 5;
};

struct SegScore {
    Span span;
    int states = 1;
    double value = 0.0;
    int iterations = 0;                // fit iterations (best restart)
    std::vector<double> fold_values;   // CV only
};

// Free parameters of a segment model: (c-1) + (A-1)*c*l for l >= 2,
// A-1 for a bare multinomial (l = 1).
int dimension(int states, int len, int alphabet_size);

// Deterministic row -> fold map: seeded shuffle, then round-robin.
std::vector<int> fold_assignments(int n_rows, int k, uint64_t seed);

// Penalized maximum likelihood: ML fit, then loglik - dimension*log(N)/2.
SegScore seg_score_bic(const AlignedDataset& ds, std::span<const int> rows,
                       Span span, int states, const ScoreConfig& cfg);

// Cheeseman-Stutz marginal-likelihood approximation at the MAP fit:
// completed-data closed-form marginal plus the observed/completed
// log-likelihood correction. The completion uses expected (fractional)
// sufficient statistics from the posterior responsibilities.
SegScore seg_score_cs(const AlignedDataset& ds, std::span<const int> rows,
                      Span span, int states, const ScoreConfig& cfg);

// Sum of held-out log-likelihoods over k fold-withheld MAP refits.
SegScore seg_score_cv(const AlignedDataset& ds, std::span<const int> rows,
                      Span span, int states, int k, const ScoreConfig& cfg);

SegScore seg_score(const AlignedDataset& ds, std::span<const int> rows, Span span,
                   int states, ScoreKind kind, const ScoreConfig& cfg);
SegScore seg_score(const AlignedDataset& ds, Span span, int states, ScoreKind kind,
                   const ScoreConfig& cfg);

}  // namespace segmix
