#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "segmix/dataset.hpp"

namespace segmix {

// Contiguous run of positions, 0-based start. Serialized forms are 1-based.
struct Span {
    int start = 0;
    int len = 0;
    int end() const { return start + len - 1; }  // inclusive
};

struct DirichletPrior {
    double emission_concentration = 0.5;
    double weight_concentration = 0.0;  // none on hidden-variable parameters

    static DirichletPrior default_for(int alphabet_size) {
        return {1.0 / alphabet_size, 0.0};
    }
};

enum class FitObjective { ML, MAP };

struct EmConfig {
    int restarts = 10;
    int max_iterations = 500;
    double tolerance = 1e-6;  // absolute objective improvement
    FitObjective objective = FitObjective::MAP;
    uint64_t seed = 0;
    bool record_traces = false;
};

// Multinomial mixture over one segment: weights over hidden states, one
// emission multinomial per (state, position). A plain multinomial is the
// states == 1 case.
struct FittedMixture {
    int states = 1;
    int span_len = 0;
    int n_symbols = 0;
    std::vector<double> weights;    // states
    std::vector<double> emissions;  // [state][position][symbol], flat

    double train_loglik = 0.0;     // observed-data log-likelihood at the fit
    double objective_value = 0.0;  // ML: loglik; MAP: loglik + prior term
    int restarts_used = 0;
    int iterations = 0;  // E-steps of the winning restart
    bool converged = false;
    int degenerate_columns = 0;  // span columns with zero observed entries

    // Populated when EmConfig::record_traces is set.
    std::vector<std::vector<double>> restart_traces;
    std::vector<double> restart_final_objectives;

    double emission(int state, int pos, int symbol) const {
        return emissions[(static_cast<size_t>(state) * span_len + pos) * n_symbols +
                         symbol];
    }
};

// EM with random restarts over the span columns of the selected rows.
// Deterministic in (data, span, states, prior, cfg): restart r draws its
// initialization from a seed hashed from (cfg.seed, span, states, r).
FittedMixture fit_em(const AlignedDataset& ds, std::span<const int> rows,
                     Span span, int states, const DirichletPrior& prior,
                     const EmConfig& cfg);
FittedMixture fit_em(const AlignedDataset& ds, Span span, int states,
                     const DirichletPrior& prior, const EmConfig& cfg);

// log Pr(obs) with missing positions marginalized; obs has span_len entries,
// kMissing marks unobserved. Log-space evaluation.
double loglik_sequence(const FittedMixture& mix, std::span<const int16_t> obs);

// Posterior over hidden states given the observed entries; the weight vector
// itself when nothing is observed.
std::vector<double> posterior_responsibilities(const FittedMixture& mix,
                                               std::span<const int16_t> obs);

struct Imputation {
    std::vector<double> distribution;  // over symbols
    int16_t symbol = 0;                // argmax, lowest index on ties
};

// Predictive distribution of position i given the other observed positions
// of obs (position i's own entry is ignored, so this is usable as a
// diagnostic on observed cells too).
Imputation impute_position(const FittedMixture& mix, std::span<const int16_t> obs,
                           int i);

// log of the Dirichlet-multinomial marginal for one multinomial family:
//   log Gamma(sum alpha) - log Gamma(sum alpha + sum n)
//   + sum_v [log Gamma(alpha_v + n_v) - log Gamma(alpha_v)].
// Counts may be fractional (expected sufficient statistics).
double complete_data_log_marginal(std::span<const double> counts,
                                  std::span<const double> alphas);

}  // namespace segmix
