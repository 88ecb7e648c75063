#include "segmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "segmix/kernels.hpp"
#include "segmix/rng.hpp"

namespace segmix {

namespace {

constexpr double kWeightFloor = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Compact copy of the span columns for the selected rows.
struct SpanMatrix {
    std::vector<int16_t> symbols;
    int n_rows = 0;
    int len = 0;
    int n_symbols = 0;
    std::vector<int> column_observed;
    long long observed_total = 0;

    kern::SpanView view() const { return {symbols.data(), n_rows, len, n_symbols}; }
};

SpanMatrix extract_span(const AlignedDataset& ds, std::span<const int> rows,
                        Span span) {
    if (span.len < 1 || span.start < 0 || span.end() >= ds.n_cols)
        throw std::invalid_argument("span [" + std::to_string(span.start + 1) + "," +
                                    std::to_string(span.end() + 1) +
                                    "] out of bounds for L=" + std::to_string(ds.n_cols));
    SpanMatrix m;
    m.n_rows = static_cast<int>(rows.size());
    m.len = span.len;
    m.n_symbols = ds.alphabet.size();
    m.symbols.resize(static_cast<size_t>(m.n_rows) * m.len);
    m.column_observed.assign(m.len, 0);
    for (int r = 0; r < m.n_rows; ++r) {
        const int16_t* src = ds.entries.data() +
                             static_cast<size_t>(rows[r]) * ds.n_cols + span.start;
        int16_t* dst = m.symbols.data() + static_cast<size_t>(r) * m.len;
        std::memcpy(dst, src, sizeof(int16_t) * m.len);
        for (int i = 0; i < m.len; ++i) {
            if (dst[i] != kMissing) {
                ++m.column_observed[i];
                ++m.observed_total;
            }
        }
    }
    return m;
}

// All mutable EM state for one fit; parameters are kept in the kernels'
// position-major padded layout until the end.
struct EmState {
    int c, cpad, len, A, n_rows;
    double alpha, wc;
    FitObjective objective;
    const SpanMatrix* data;

    std::vector<double> weights;     // cpad
    std::vector<double> emissions;   // len*A*cpad
    std::vector<double> prod, resp;  // n_rows*cpad
    std::vector<double> counts;      // len*A*cpad
    std::vector<double> state_sums;  // cpad
    double prior_term = 0.0;         // at current parameters (MAP only)

    EmState(const SpanMatrix& d, int c_, const DirichletPrior& prior,
            FitObjective obj)
        : c(c_),
          cpad(kern::padded_states(c_)),
          len(d.len),
          A(d.n_symbols),
          n_rows(d.n_rows),
          alpha(obj == FitObjective::MAP ? prior.emission_concentration : 0.0),
          wc(obj == FitObjective::MAP ? prior.weight_concentration : 0.0),
          objective(obj),
          data(&d) {
        weights.assign(cpad, 0.0);
        emissions.assign(static_cast<size_t>(len) * A * cpad, 0.0);
        prod.assign(static_cast<size_t>(n_rows) * cpad, 0.0);
        resp.assign(static_cast<size_t>(n_rows) * cpad, 0.0);
        counts.assign(emissions.size(), 0.0);
        state_sums.assign(cpad, 0.0);
    }

    void random_responsibilities(Rng& rng) {
        for (int r = 0; r < n_rows; ++r) {
            double* w = resp.data() + static_cast<size_t>(r) * cpad;
            double sum = 0.0;
            for (int k = 0; k < c; ++k) {
                w[k] = rng.next_exponential();
                sum += w[k];
            }
            if (sum <= 0.0) {  // all draws zero; fall back to uniform
                for (int k = 0; k < c; ++k) w[k] = 1.0 / c;
            } else {
                for (int k = 0; k < c; ++k) w[k] /= sum;
            }
            for (int k = c; k < cpad; ++k) w[k] = 0.0;
        }
    }

    // Maximizes the expected complete-data objective given resp; refreshes
    // the prior term for the new parameters.
    void m_step() {
        std::fill(counts.begin(), counts.end(), 0.0);
        std::fill(state_sums.begin(), state_sums.end(), 0.0);
        kern::mstep_accumulate(data->view(), resp.data(), c, counts.data(),
                               state_sums.data());
        prior_term = 0.0;

        double wsum = 0.0;
        for (int k = 0; k < c; ++k) {
            double w = (state_sums[k] + wc) / (n_rows + c * wc);
            weights[k] = std::max(w, kWeightFloor);
            wsum += weights[k];
        }
        for (int k = 0; k < c; ++k) {
            weights[k] /= wsum;
            if (wc > 0.0) prior_term += wc * std::log(weights[k]);
        }

        for (int i = 0; i < len; ++i) {
            for (int k = 0; k < c; ++k) {
                double tot = 0.0;
                for (int v = 0; v < A; ++v)
                    tot += counts[(static_cast<size_t>(i) * A + v) * cpad + k];
                for (int v = 0; v < A; ++v) {
                    const size_t idx = (static_cast<size_t>(i) * A + v) * cpad + k;
                    double e;
                    if (alpha > 0.0) {
                        e = (counts[idx] + alpha) / (tot + A * alpha);
                    } else {
                        e = tot > 0.0 ? counts[idx] / tot : 1.0 / A;
                    }
                    emissions[idx] = e;
                    if (alpha > 0.0) prior_term += alpha * std::log(e);
                }
            }
        }
    }

    // Fills resp with posteriors at the current parameters and returns the
    // observed-data log-likelihood.
    double e_step() {
        kern::estep_products(data->view(), weights.data(), emissions.data(), c,
                             prod.data());
        double ll = 0.0;
        for (int r = 0; r < n_rows; ++r) {
            const double* p = prod.data() + static_cast<size_t>(r) * cpad;
            double* w = resp.data() + static_cast<size_t>(r) * cpad;
            double s = 0.0;
            for (int k = 0; k < c; ++k) s += p[k];
            if (s > 1e-280 && std::isfinite(s)) {
                ll += std::log(s);
                for (int k = 0; k < c; ++k) w[k] = p[k] / s;
            } else {
                ll += log_space_row(r, w);
            }
            for (int k = c; k < cpad; ++k) w[k] = 0.0;
        }
        return ll;
    }

    // Log-space fallback for rows whose linear-space product underflows.
    double log_space_row(int r, double* w) const {
        const int16_t* row = data->symbols.data() + static_cast<size_t>(r) * len;
        std::vector<double> lw(c);
        for (int k = 0; k < c; ++k) lw[k] = std::log(weights[k]);
        for (int i = 0; i < len; ++i) {
            const int v = row[i];
            if (v < 0) continue;
            for (int k = 0; k < c; ++k)
                lw[k] += std::log(emissions[(static_cast<size_t>(i) * A + v) * cpad + k]);
        }
        const double m = *std::max_element(lw.begin(), lw.end());
        if (!std::isfinite(m)) return kNegInf;
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += std::exp(lw[k] - m);
        const double lse = m + std::log(s);
        for (int k = 0; k < c; ++k) w[k] = std::exp(lw[k] - lse);
        return lse;
    }
};

struct RestartResult {
    std::vector<double> weights;    // cpad layout
    std::vector<double> emissions;  // kernel layout
    double loglik = kNegInf;
    double objective = kNegInf;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

RestartResult run_restart(EmState& st, uint64_t restart_seed, const EmConfig& cfg) {
    RestartResult out;
    Rng rng(restart_seed);
    st.random_responsibilities(rng);
    st.m_step();

    double prev = kNegInf;
    for (int t = 1; t <= cfg.max_iterations; ++t) {
        const double ll = st.e_step();
        const double obj = ll + st.prior_term;
        out.iterations = t;
        out.loglik = ll;
        out.objective = obj;
        if (cfg.record_traces) out.trace.push_back(obj);
        if (obj - prev < cfg.tolerance) {
            out.converged = true;
            break;
        }
        prev = obj;
        if (t < cfg.max_iterations) st.m_step();  // keep params matched to obj
    }
    out.weights = st.weights;
    out.emissions = st.emissions;
    return out;
}

}  // namespace

FittedMixture fit_em(const AlignedDataset& ds, std::span<const int> rows,
                     Span span, int states, const DirichletPrior& prior,
                     const EmConfig& cfg) {
    if (states < 1) throw std::invalid_argument("cardinality must be >= 1");
    if (cfg.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (cfg.tolerance <= 0) throw std::invalid_argument("tolerance must be > 0");
    if (rows.empty()) throw std::invalid_argument("fit_em: no training rows");
    if (cfg.objective == FitObjective::MAP && prior.emission_concentration <= 0)
        throw std::invalid_argument("emission concentration must be > 0");

    SpanMatrix data = extract_span(ds, rows, span);
    if (data.observed_total == 0)
        throw std::runtime_error("fit_em: no observed entries in span [" +
                                 std::to_string(span.start + 1) + "," +
                                 std::to_string(span.end() + 1) + "]");

    EmState st(data, states, prior, cfg.objective);
    RestartResult best;
    bool have_best = false;

    FittedMixture fit;
    fit.states = states;
    fit.span_len = span.len;
    fit.n_symbols = ds.alphabet.size();
    fit.restarts_used = cfg.restarts;
    for (int obs : data.column_observed) fit.degenerate_columns += (obs == 0);

    for (int r = 0; r < cfg.restarts; ++r) {
        const uint64_t restart_seed =
            derive_seed({cfg.seed, stream::kEmRestart, static_cast<uint64_t>(span.start),
                         static_cast<uint64_t>(span.len), static_cast<uint64_t>(states),
                         static_cast<uint64_t>(r)});
        RestartResult res = run_restart(st, restart_seed, cfg);
        if (!std::isfinite(res.objective))
            throw std::runtime_error("fit_em: non-finite objective in restart " +
                                     std::to_string(r + 1) + " of span [" +
                                     std::to_string(span.start + 1) + "," +
                                     std::to_string(span.end() + 1) + "]");
        if (cfg.record_traces) {
            fit.restart_traces.push_back(res.trace);
            fit.restart_final_objectives.push_back(res.objective);
        }
        if (!have_best || res.objective > best.objective) {
            best = std::move(res);
            have_best = true;
        }
    }

    fit.train_loglik = best.loglik;
    fit.objective_value = best.objective;
    fit.iterations = best.iterations;
    fit.converged = best.converged;

    // Convert from the kernels' position-major padded layout.
    const int cpad = kern::padded_states(states);
    fit.weights.resize(states);
    for (int k = 0; k < states; ++k) fit.weights[k] = best.weights[k];
    fit.emissions.resize(static_cast<size_t>(states) * span.len * fit.n_symbols);
    for (int k = 0; k < states; ++k)
        for (int i = 0; i < span.len; ++i)
            for (int v = 0; v < fit.n_symbols; ++v)
                fit.emissions[(static_cast<size_t>(k) * span.len + i) * fit.n_symbols + v] =
                    best.emissions[(static_cast<size_t>(i) * fit.n_symbols + v) * cpad + k];
    return fit;
}

FittedMixture fit_em(const AlignedDataset& ds, Span span, int states,
                     const DirichletPrior& prior, const EmConfig& cfg) {
    std::vector<int> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return fit_em(ds, rows, span, states, prior, cfg);
}

namespace {

// Per-state log scores for the observed entries of obs; returns false when
// nothing is observed.
bool state_log_scores(const FittedMixture& mix, std::span<const int16_t> obs,
                      int skip_pos, std::vector<double>& lw) {
    if (static_cast<int>(obs.size()) != mix.span_len)
        throw std::invalid_argument("observation length " + std::to_string(obs.size()) +
                                    " does not match segment length " +
                                    std::to_string(mix.span_len));
    lw.assign(mix.states, 0.0);
    bool any = false;
    for (int k = 0; k < mix.states; ++k) lw[k] = std::log(mix.weights[k]);
    for (int i = 0; i < mix.span_len; ++i) {
        if (i == skip_pos) continue;
        const int v = obs[i];
        if (v < 0) continue;
        if (v >= mix.n_symbols)
            throw std::invalid_argument("symbol index out of range at position " +
                                        std::to_string(i + 1));
        any = true;
        for (int k = 0; k < mix.states; ++k) lw[k] += std::log(mix.emission(k, i, v));
    }
    return any;
}

double logsumexp(const std::vector<double>& lw) {
    const double m = *std::max_element(lw.begin(), lw.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : lw) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> normalized_posterior(const FittedMixture& mix,
                                         std::span<const int16_t> obs,
                                         int skip_pos) {
    std::vector<double> lw;
    if (!state_log_scores(mix, obs, skip_pos, lw)) return mix.weights;
    const double lse = logsumexp(lw);
    std::vector<double> post(mix.states);
    for (int k = 0; k < mix.states; ++k) post[k] = std::exp(lw[k] - lse);
    return post;
}

}  // namespace

double loglik_sequence(const FittedMixture& mix, std::span<const int16_t> obs) {
    std::vector<double> lw;
    if (!state_log_scores(mix, obs, -1, lw)) return 0.0;
    return logsumexp(lw);
}

std::vector<double> posterior_responsibilities(const FittedMixture& mix,
                                               std::span<const int16_t> obs) {
    return normalized_posterior(mix, obs, -1);
}

Imputation impute_position(const FittedMixture& mix, std::span<const int16_t> obs,
                           int i) {
    if (i < 0 || i >= mix.span_len)
        throw std::invalid_argument("impute_position: position " + std::to_string(i + 1) +
                                    " outside segment");
    const std::vector<double> post = normalized_posterior(mix, obs, i);
    Imputation out;
    out.distribution.assign(mix.n_symbols, 0.0);
    for (int k = 0; k < mix.states; ++k)
        for (int v = 0; v < mix.n_symbols; ++v)
            out.distribution[v] += post[k] * mix.emission(k, i, v);
    out.symbol = 0;
    for (int v = 1; v < mix.n_symbols; ++v)
        if (out.distribution[v] > out.distribution[out.symbol])
            out.symbol = static_cast<int16_t>(v);
    return out;
}

double complete_data_log_marginal(std::span<const double> counts,
                                  std::span<const double> alphas) {
    if (counts.size() != alphas.size())
        throw std::invalid_argument("counts/alphas size mismatch");
    if (counts.empty()) return 0.0;
    double sum_n = 0.0, sum_a = 0.0;
    for (size_t v = 0; v < counts.size(); ++v) {
        if (counts[v] < 0.0) throw std::invalid_argument("negative count");
        if (alphas[v] <= 0.0) throw std::invalid_argument("concentrations must be > 0");
        sum_n += counts[v];
        sum_a += alphas[v];
    }
    double value = std::lgamma(sum_a) - std::lgamma(sum_a + sum_n);
    for (size_t v = 0; v < counts.size(); ++v)
        value += std::lgamma(alphas[v] + counts[v]) - std::lgamma(alphas[v]);
    return value;
}

}  // namespace segmix
