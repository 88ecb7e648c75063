#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segmix/model.hpp"

namespace segmix {

struct MethodSpec {
    enum class Algo { DP, Greedy, Ind, Clust };
    Algo algo = Algo::DP;
    ScoreKind kind = ScoreKind::CV;  // DP/Greedy/Clust selection score
    std::string name = "dp+cv";

    // "ind", "clust", "dp+bic", "dp+cs", "dp+cv", "greedy+..."
    static MethodSpec parse(const std::string& text);
};

struct EvalConfig {
    ScoreConfig scoring;
    int cmax = 5;
    int lmax = 50;
    int final_restarts = 25;
    int jobs = 1;
    PruneConfig prune;
    bool majority_global = false;  // imputation baseline variant
};

struct EvalReport {
    // Held-out protocol: one test log-likelihood per (method, row).
    std::vector<std::string> methods;
    std::vector<std::vector<double>> test_loglik;  // [method][row]
    std::vector<double> totals;
    std::vector<double> relative_totals;  // vs IND
    struct PairTest {
        int method_a = 0, method_b = 0;
        int wins_a = 0, wins_b = 0, ties = 0;
        double p_value = 1.0;  // NaN when every pair tied
    };
    std::vector<PairTest> pair_tests;

    // Missing-value protocol.
    std::string imputation_method;
    std::vector<double> rates;
    struct ImputationCell {
        bool present = false;  // false when the mask came out empty
        long long n_masked = 0;
        double model_error = 0.0;
        double majority_error = 0.0;
    };
    std::vector<std::vector<ImputationCell>> imputation;  // [rate][repeat]
    struct RateSummary {
        int n_present = 0;
        double model_mean = 0.0, model_stddev = 0.0;
        double majority_mean = 0.0, majority_stddev = 0.0;
    };
    std::vector<RateSummary> rate_summaries;

    uint64_t seed = 0;
};

// Observer for fold discipline checks: called once per fold with the train
// and test row index sets before any training happens.
using FoldHook =
    std::function<void(int fold, std::span<const int> train, std::span<const int> test)>;

// Trains one method on the given training rows of ds (the model sees only
// those rows) and returns the assembled model.
SegmentationModel train_method(const AlignedDataset& ds, std::span<const int> rows,
                               const MethodSpec& method, const EvalConfig& cfg,
                               uint64_t seed);

// Trains every method on each fold's training rows and records test-row
// log-likelihoods; IND is added if absent since relative totals are reported
// against it.
EvalReport kfold_holdout_eval(const AlignedDataset& ds,
                              std::vector<MethodSpec> methods, int folds,
                              uint64_t seed, const EvalConfig& cfg,
                              const FoldHook& hook = {});

// Two-sided exact binomial test on wins of A over B; ties dropped. Throws if
// every pair is tied.
double sign_test(std::span<const std::pair<double, double>> pairs);

// Masks observed cells at each rate, retrains, imputes the masked cells, and
// reports error rates against the per-column majority baseline (global
// majority when cfg.majority_global).
EvalReport missing_value_experiment(const AlignedDataset& ds,
                                    std::span<const double> rates, int repeats,
                                    const MethodSpec& method, uint64_t seed,
                                    const EvalConfig& cfg);

struct PlantedData {
    AlignedDataset data;
    Segmentation truth;
};

// Blocked synthetic generator: per block, types_per_block archetype strings;
// each row copies one archetype per block, flips each symbol to a different
// one with probability noise, then missing_rate of the cells are hidden.
PlantedData generate_planted_blocks(int n_rows, int length, int alphabet_size,
                                    int block_length, int types_per_block,
                                    double noise, double missing_rate,
                                    uint64_t seed);

struct BoundaryScore {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Precision/recall/F1 on internal boundary positions.
BoundaryScore boundary_score(const Segmentation& predicted,
                             const Segmentation& truth);

Json eval_report_to_json(const EvalReport& report);
// Long-format TSV: method <tab> metric <tab> key <tab> value.
void write_long_tsv(const EvalReport& report, std::ostream& out);

}  // namespace segmix
