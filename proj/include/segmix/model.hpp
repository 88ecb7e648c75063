#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "segmix/segment_dp.hpp"

namespace segmix {

using Json = nlohmann::ordered_json;

struct SegmentModel {
    Segment segment;
    FittedMixture mixture;
};

// The full generative model: a segmentation plus one fitted mixture per
// segment (a plain smoothed multinomial for length-1 segments). Immutable
// after assembly; queries are read-only.
struct SegmentationModel {
    Alphabet alphabet;
    std::string missing_token = "?";
    std::vector<SegmentModel> segments;
    Json provenance = Json::object();

    int sequence_length() const;
    const SegmentModel& segment_at(int pos) const;  // by position, 0-based
};

// Refits every segment at its declared cardinality with the final restart
// budget (cfg.restarts); deterministic in cfg.seed.
SegmentationModel assemble_model(const AlignedDataset& ds, const Segmentation& seg,
                                 const DirichletPrior& prior, const EmConfig& cfg);

// Total log-likelihood of a length-L row; missing entries marginalized.
double model_loglik(const SegmentationModel& model, std::span<const int16_t> row);

struct ImputedCell {
    int col = 0;  // 0-based position
    int16_t symbol = 0;
    double posterior = 0.0;  // distribution[symbol]
    std::vector<double> distribution;
};

// Fills every missing cell with the argmax of its within-segment predictive
// distribution; observed cells pass through.
std::pair<std::vector<int16_t>, std::vector<ImputedCell>> impute_missing(
    const SegmentationModel& model, std::span<const int16_t> row);

struct SegmentType {
    int segment_index = 0;
    bool correlated = false;  // false for length-1 segments
    int state = 0;            // 0-based MAP hidden state
    double posterior = 1.0;
};

std::vector<SegmentType> assign_types(const SegmentationModel& model,
                                      std::span<const int16_t> row);

struct TagSelection {
    std::vector<int> positions;           // within-segment offsets, selection order
    std::vector<double> cumulative_mi;    // I(H; selected so far), nats
    double hidden_entropy = 0.0;          // H(H), the MI ceiling
};

// Greedy forward selection of segment positions by exact mutual information
// with the segment's hidden variable, computed from the model parameters by
// enumerating joint configurations of the selected positions.
TagSelection select_tags(const SegmentationModel& model, int segment_index,
                         int budget, long long max_configs = 2000000);

// All length-1 segments with smoothed per-column multinomials.
SegmentationModel build_ind_baseline(const AlignedDataset& ds,
                                     const DirichletPrior& prior);

// One segment spanning all positions; cardinality picked from 2..Cmax by the
// CV segment score, then refit with the final budget.
SegmentationModel build_clust_baseline(const AlignedDataset& ds, int Cmax,
                                       int folds, const ScoreConfig& score_cfg,
                                       const EmConfig& final_cfg);

Json model_to_json(const SegmentationModel& model);
SegmentationModel model_from_json(const Json& j);
void save_model(const SegmentationModel& model, const std::string& path);
SegmentationModel load_model(const std::string& path);

Json segmentation_to_json(const Segmentation& seg, double total_score,
                          const Json& provenance);

}  // namespace segmix
