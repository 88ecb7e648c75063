#include "segmix/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "segmix/rng.hpp"

namespace segmix {

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::BIC: return "bic";
        case ScoreKind::CS: return "cs";
        case ScoreKind::CV: return "cv";
    }
    return "?";
}

ScoreKind score_kind_from_string(const std::string& name) {
    if (name == "bic" || name == "mdl") return ScoreKind::BIC;
    if (name == "cs") return ScoreKind::CS;
    if (name == "cv") return ScoreKind::CV;
    throw std::invalid_argument("unknown score kind '" + name + "' (expected bic|cs|cv)");
}

int dimension(int states, int len, int alphabet_size) {
    if (states < 1 || len < 1 || alphabet_size < 2)
        throw std::invalid_argument("dimension: need states >= 1, len >= 1, A >= 2");
    if (len == 1) return alphabet_size - 1;
    return (states - 1) + (alphabet_size - 1) * states * len;
}

std::vector<int> fold_assignments(int n_rows, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold count must be >= 2");
    if (k > n_rows)
        throw std::invalid_argument("fold count " + std::to_string(k) +
                                    " exceeds row count " + std::to_string(n_rows));
    std::vector<int> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n_rows - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<int> fold(n_rows);
    for (int pos = 0; pos < n_rows; ++pos) fold[order[pos]] = pos % k;
    return fold;
}

namespace {

std::vector<int> all_rows(const AlignedDataset& ds) {
    std::vector<int> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

EmConfig make_em_config(const ScoreConfig& cfg, FitObjective objective,
                        uint64_t seed) {
    EmConfig em;
    em.restarts = cfg.restarts;
    em.max_iterations = cfg.max_iterations;
    em.tolerance = cfg.tolerance;
    em.objective = objective;
    em.seed = seed;
    return em;
}

int effective_states(Span span, int states) {
    return span.len == 1 ? 1 : states;
}

std::span<const int16_t> row_span(const AlignedDataset& ds, int row, Span span) {
    return ds.row(row).subspan(span.start, span.len);
}

// Per-column observed symbol counts, used by the closed-form CS cases.
std::vector<std::vector<double>> column_counts(const AlignedDataset& ds,
                                               std::span<const int> rows, Span span) {
    std::vector<std::vector<double>> counts(
        span.len, std::vector<double>(ds.alphabet.size(), 0.0));
    for (int r : rows) {
        auto obs = row_span(ds, r, span);
        for (int i = 0; i < span.len; ++i)
            if (obs[i] != kMissing) counts[i][obs[i]] += 1.0;
    }
    return counts;
}

}  // namespace

SegScore seg_score_bic(const AlignedDataset& ds, std::span<const int> rows,
                       Span span, int states, const ScoreConfig& cfg) {
    const int c = effective_states(span, states);
    FittedMixture fit = fit_em(ds, rows, span, c, cfg.prior,
                               make_em_config(cfg, FitObjective::ML, cfg.seed));
    const int d = dimension(c, span.len, ds.alphabet.size());
    SegScore score;
    score.span = span;
    score.states = c;
    score.iterations = fit.iterations;
    score.value = fit.train_loglik -
                  0.5 * d * std::log(static_cast<double>(rows.size()));
    return score;
}

SegScore seg_score_cs(const AlignedDataset& ds, std::span<const int> rows,
                      Span span, int states, const ScoreConfig& cfg) {
    const int c = effective_states(span, states);
    const int A = ds.alphabet.size();
    const std::vector<double> alpha(A, cfg.prior.emission_concentration);

    SegScore score;
    score.span = span;
    score.states = c;

    if (c == 1) {
        // No hidden variable: the marginal likelihood is exact, one
        // Dirichlet-multinomial family per column.
        double value = 0.0;
        for (const auto& counts : column_counts(ds, rows, span))
            value += complete_data_log_marginal(counts, alpha);
        score.value = value;
        return score;
    }

    FittedMixture fit = fit_em(ds, rows, span, c, cfg.prior,
                               make_em_config(cfg, FitObjective::MAP, cfg.seed));
    score.iterations = fit.iterations;

    // Expected sufficient statistics of the completion under the MAP fit.
    std::vector<double> state_counts(c, 0.0);
    std::vector<double> emission_counts(static_cast<size_t>(c) * span.len * A, 0.0);
    double observed_loglik = 0.0;
    for (int r : rows) {
        auto obs = row_span(ds, r, span);
        observed_loglik += loglik_sequence(fit, obs);
        const std::vector<double> post = posterior_responsibilities(fit, obs);
        for (int k = 0; k < c; ++k) {
            state_counts[k] += post[k];
            for (int i = 0; i < span.len; ++i)
                if (obs[i] != kMissing)
                    emission_counts[(static_cast<size_t>(k) * span.len + i) * A +
                                    obs[i]] += post[k];
        }
    }

    // Completed-data marginal: the closed form needs a proper prior, so the
    // hidden-state family falls back to concentration 1 when the model prior
    // carries no weight pseudocounts.
    const double wc =
        cfg.prior.weight_concentration > 0.0 ? cfg.prior.weight_concentration : 1.0;
    const std::vector<double> weight_alpha(c, wc);
    double completed_marginal =
        complete_data_log_marginal(state_counts, weight_alpha);
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < span.len; ++i) {
            std::span<const double> family(
                emission_counts.data() + (static_cast<size_t>(k) * span.len + i) * A,
                static_cast<size_t>(A));
            completed_marginal += complete_data_log_marginal(family, alpha);
        }

    // Completed-data log-likelihood at the MAP parameters.
    double completed_loglik = 0.0;
    for (int k = 0; k < c; ++k) {
        completed_loglik += state_counts[k] * std::log(fit.weights[k]);
        for (int i = 0; i < span.len; ++i)
            for (int v = 0; v < A; ++v) {
                const double n =
                    emission_counts[(static_cast<size_t>(k) * span.len + i) * A + v];
                if (n > 0.0) completed_loglik += n * std::log(fit.emission(k, i, v));
            }
    }

    score.value = completed_marginal + observed_loglik - completed_loglik;
    return score;
}

SegScore seg_score_cv(const AlignedDataset& ds, std::span<const int> rows,
                      Span span, int states, int k, const ScoreConfig& cfg) {
    const int n = static_cast<int>(rows.size());
    const int c = effective_states(span, states);
    const std::vector<int> fold = fold_assignments(
        n, k, derive_seed({cfg.seed, stream::kCvFolds, static_cast<uint64_t>(k),
                           static_cast<uint64_t>(n)}));

    SegScore score;
    score.span = span;
    score.states = c;
    score.fold_values.assign(k, 0.0);

    for (int f = 0; f < k; ++f) {
        std::vector<int> train;
        std::vector<int> test;
        train.reserve(n);
        for (int j = 0; j < n; ++j) (fold[j] == f ? test : train).push_back(rows[j]);

        FittedMixture fit;
        try {
            fit = fit_em(ds, train, span, c, cfg.prior,
                         make_em_config(cfg, FitObjective::MAP,
                                        derive_seed({cfg.seed, stream::kCvFit,
                                                     static_cast<uint64_t>(f)})));
        } catch (const std::exception& e) {
            throw std::runtime_error("cv fold " + std::to_string(f + 1) + " of " +
                                     std::to_string(k) + ": " + e.what());
        }
        score.iterations += fit.iterations;

        double held_out = 0.0;
        for (int r : test) held_out += loglik_sequence(fit, row_span(ds, r, span));
        score.fold_values[f] = held_out;
        score.value += held_out;
    }
    return score;
}

SegScore seg_score(const AlignedDataset& ds, std::span<const int> rows, Span span,
                   int states, ScoreKind kind, const ScoreConfig& cfg) {
    switch (kind) {
        case ScoreKind::BIC: return seg_score_bic(ds, rows, span, states, cfg);
        case ScoreKind::CS: return seg_score_cs(ds, rows, span, states, cfg);
        case ScoreKind::CV:
            return seg_score_cv(ds, rows, span, states, cfg.cv_folds, cfg);
    }
    throw std::logic_error("unreachable score kind");
}

SegScore seg_score(const AlignedDataset& ds, Span span, int states, ScoreKind kind,
                   const ScoreConfig& cfg) {
    return seg_score(ds, all_rows(ds), span, states, kind, cfg);
}

}  // namespace segmix
