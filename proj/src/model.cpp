#include "segmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace segmix {

int SegmentationModel::sequence_length() const {
    int L = 0;
    for (const auto& sm : segments) L += sm.segment.len;
    return L;
}

const SegmentModel& SegmentationModel::segment_at(int pos) const {
    for (const auto& sm : segments)
        if (pos >= sm.segment.start && pos <= sm.segment.end()) return sm;
    throw std::out_of_range("position " + std::to_string(pos + 1) +
                            " outside the model's segmentation");
}

namespace {

std::span<const int16_t> slice(std::span<const int16_t> row, const Segment& seg) {
    return row.subspan(seg.start, seg.len);
}

void check_row_length(const SegmentationModel& model, std::span<const int16_t> row) {
    if (static_cast<int>(row.size()) != model.sequence_length())
        throw std::invalid_argument("row length " + std::to_string(row.size()) +
                                    " does not match model length " +
                                    std::to_string(model.sequence_length()));
}

}  // namespace

SegmentationModel assemble_model(const AlignedDataset& ds, const Segmentation& seg,
                                 const DirichletPrior& prior, const EmConfig& cfg) {
    seg.validate(ds.n_cols);
    SegmentationModel model;
    model.alphabet = ds.alphabet;
    model.missing_token = ds.missing_token;
    model.segments.reserve(seg.segments.size());
    int degenerate = 0;
    for (const auto& segment : seg.segments) {
        const int c = segment.len == 1 ? 1 : segment.states;
        SegmentModel sm;
        sm.segment = segment;
        sm.segment.states = c;
        sm.mixture = fit_em(ds, segment.span(), c, prior, cfg);
        degenerate += sm.mixture.degenerate_columns;
        model.segments.push_back(std::move(sm));
    }
    if (degenerate > 0)
        std::fprintf(stderr,
                     "warning: %d span column(s) with no observed entries; "
                     "emissions there are prior-only\n",
                     degenerate);
    return model;
}

double model_loglik(const SegmentationModel& model, std::span<const int16_t> row) {
    check_row_length(model, row);
    double total = 0.0;
    for (const auto& sm : model.segments)
        total += loglik_sequence(sm.mixture, slice(row, sm.segment));
    return total;
}

std::pair<std::vector<int16_t>, std::vector<ImputedCell>> impute_missing(
    const SegmentationModel& model, std::span<const int16_t> row) {
    check_row_length(model, row);
    std::vector<int16_t> completed(row.begin(), row.end());
    std::vector<ImputedCell> cells;
    for (const auto& sm : model.segments) {
        auto obs = slice(row, sm.segment);
        for (int i = 0; i < sm.segment.len; ++i) {
            if (obs[i] != kMissing) continue;
            Imputation imp = impute_position(sm.mixture, obs, i);
            ImputedCell cell;
            cell.col = sm.segment.start + i;
            cell.symbol = imp.symbol;
            cell.posterior = imp.distribution[imp.symbol];
            cell.distribution = std::move(imp.distribution);
            completed[cell.col] = cell.symbol;
            cells.push_back(std::move(cell));
        }
    }
    return {std::move(completed), std::move(cells)};
}

std::vector<SegmentType> assign_types(const SegmentationModel& model,
                                      std::span<const int16_t> row) {
    check_row_length(model, row);
    std::vector<SegmentType> types;
    types.reserve(model.segments.size());
    for (size_t a = 0; a < model.segments.size(); ++a) {
        const auto& sm = model.segments[a];
        SegmentType t;
        t.segment_index = static_cast<int>(a);
        t.correlated = sm.segment.len >= 2;
        if (!t.correlated) {
            t.state = 0;
            t.posterior = 1.0;
        } else {
            const std::vector<double> post =
                posterior_responsibilities(sm.mixture, slice(row, sm.segment));
            int best = 0;
            for (int k = 1; k < sm.mixture.states; ++k)
                if (post[k] > post[best]) best = k;
            t.state = best;
            t.posterior = post[best];
        }
        types.push_back(t);
    }
    return types;
}

namespace {

// I(H; X_S) by enumerating the A^|S| joint configurations of the selected
// positions. States with zero joint mass contribute zero.
double subset_mutual_information(const FittedMixture& mix,
                                 const std::vector<int>& positions) {
    const int c = mix.states;
    const int A = mix.n_symbols;
    const size_t n = positions.size();
    std::vector<int> config(n, 0);
    std::vector<double> cond(c);
    double mi = 0.0;
    for (;;) {
        double px = 0.0;
        for (int k = 0; k < c; ++k) {
            double p = 1.0;
            for (size_t j = 0; j < n; ++j)
                p *= mix.emission(k, positions[j], config[j]);
            cond[k] = p;
            px += mix.weights[k] * p;
        }
        if (px > 0.0) {
            for (int k = 0; k < c; ++k) {
                const double joint = mix.weights[k] * cond[k];
                if (joint > 0.0) mi += joint * (std::log(cond[k]) - std::log(px));
            }
        }
        size_t j = 0;
        while (j < n && ++config[j] == A) config[j++] = 0;
        if (j == n) break;
    }
    return std::max(mi, 0.0);
}

}  // namespace

TagSelection select_tags(const SegmentationModel& model, int segment_index,
                         int budget, long long max_configs) {
    if (segment_index < 0 || segment_index >= static_cast<int>(model.segments.size()))
        throw std::out_of_range("segment index " + std::to_string(segment_index + 1) +
                                " out of range");
    const auto& sm = model.segments[segment_index];
    if (!sm.segment.correlated())
        throw std::invalid_argument("segment " + std::to_string(segment_index + 1) +
                                    " is not correlated (length " +
                                    std::to_string(sm.segment.len) + ", cardinality " +
                                    std::to_string(sm.segment.states) + ")");
    if (budget < 1 || budget > sm.segment.len)
        throw std::invalid_argument("budget must be in [1, segment length]");

    const int A = sm.mixture.n_symbols;
    TagSelection sel;
    for (int k = 0; k < sm.mixture.states; ++k) {
        const double w = sm.mixture.weights[k];
        if (w > 0.0) sel.hidden_entropy -= w * std::log(w);
    }

    std::vector<int> chosen;
    std::vector<bool> used(sm.segment.len, false);
    long long configs = 1;
    for (int step = 0; step < budget; ++step) {
        if (configs > max_configs / A)
            throw std::runtime_error(
                "tag selection would enumerate more than " +
                std::to_string(max_configs) +
                " configurations; lower the budget or raise the cap");
        configs *= A;
        int best_pos = -1;
        double best_mi = -1.0;
        for (int i = 0; i < sm.segment.len; ++i) {
            if (used[i]) continue;
            std::vector<int> trial = chosen;
            trial.push_back(i);
            const double mi = subset_mutual_information(sm.mixture, trial);
            if (mi > best_mi) {
                best_mi = mi;
                best_pos = i;
            }
        }
        used[best_pos] = true;
        chosen.push_back(best_pos);
        sel.positions.push_back(best_pos);
        sel.cumulative_mi.push_back(best_mi);
    }
    return sel;
}

SegmentationModel build_ind_baseline(const AlignedDataset& ds,
                                     const DirichletPrior& prior) {
    Segmentation seg;
    for (int i = 0; i < ds.n_cols; ++i) seg.segments.push_back({i, 1, 1});
    EmConfig cfg;
    cfg.restarts = 1;  // single-state fits are deterministic
    cfg.objective = FitObjective::MAP;
    return assemble_model(ds, seg, prior, cfg);
}

SegmentationModel build_clust_baseline(const AlignedDataset& ds, int Cmax,
                                       int folds, const ScoreConfig& score_cfg,
                                       const EmConfig& final_cfg) {
    if (Cmax < 2) throw std::invalid_argument("clust baseline needs Cmax >= 2");
    const Span span{0, ds.n_cols};
    std::vector<int> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);

    int best_c = 2;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int c = 2; c <= Cmax; ++c) {
        const double v = seg_score_cv(ds, rows, span, c, folds, score_cfg).value;
        if (v > best_value) {
            best_value = v;
            best_c = c;
        }
    }

    Segmentation seg;
    seg.segments.push_back({0, ds.n_cols, best_c});
    SegmentationModel model = assemble_model(ds, seg, score_cfg.prior, final_cfg);
    model.provenance["method"] = "clust";
    model.provenance["selected_cardinality"] = best_c;
    model.provenance["selection_cv_score"] = best_value;
    return model;
}

Json model_to_json(const SegmentationModel& model) {
    Json j;
    j["format"] = "segmix-model-v1";
    j["alphabet"] = Json::object();
    j["alphabet"]["symbols"] = model.alphabet.symbols();
    j["alphabet"]["missing_token"] = model.missing_token;
    j["length"] = model.sequence_length();
    Json segs = Json::array();
    for (const auto& sm : model.segments) {
        Json s;
        s["start"] = sm.segment.start + 1;
        s["length"] = sm.segment.len;
        s["cardinality"] = sm.segment.states;
        s["weights"] = sm.mixture.weights;
        Json emissions = Json::array();
        for (int k = 0; k < sm.mixture.states; ++k) {
            Json per_state = Json::array();
            for (int i = 0; i < sm.segment.len; ++i) {
                Json per_pos = Json::array();
                for (int v = 0; v < sm.mixture.n_symbols; ++v)
                    per_pos.push_back(sm.mixture.emission(k, i, v));
                per_state.push_back(std::move(per_pos));
            }
            emissions.push_back(std::move(per_state));
        }
        s["emissions"] = std::move(emissions);
        segs.push_back(std::move(s));
    }
    j["segments"] = std::move(segs);
    j["provenance"] = model.provenance;
    return j;
}

SegmentationModel model_from_json(const Json& j) {
    if (j.value("format", "") != "segmix-model-v1")
        throw std::runtime_error("not a segmix model file (bad format field)");
    SegmentationModel model;
    model.alphabet =
        Alphabet(j.at("alphabet").at("symbols").get<std::vector<std::string>>());
    model.missing_token = j.at("alphabet").value("missing_token", "?");
    model.provenance = j.value("provenance", Json::object());

    const int A = model.alphabet.size();
    for (const auto& s : j.at("segments")) {
        SegmentModel sm;
        sm.segment.start = s.at("start").get<int>() - 1;
        sm.segment.len = s.at("length").get<int>();
        sm.segment.states = s.at("cardinality").get<int>();
        sm.mixture.states = sm.segment.states;
        sm.mixture.span_len = sm.segment.len;
        sm.mixture.n_symbols = A;
        sm.mixture.weights = s.at("weights").get<std::vector<double>>();
        if (static_cast<int>(sm.mixture.weights.size()) != sm.segment.states)
            throw std::runtime_error("model weights size mismatch");
        sm.mixture.emissions.reserve(
            static_cast<size_t>(sm.segment.states) * sm.segment.len * A);
        for (const auto& per_state : s.at("emissions"))
            for (const auto& per_pos : per_state) {
                if (static_cast<int>(per_pos.size()) != A)
                    throw std::runtime_error("model emission row size mismatch");
                for (const auto& p : per_pos)
                    sm.mixture.emissions.push_back(p.get<double>());
            }
        if (sm.mixture.emissions.size() !=
            static_cast<size_t>(sm.segment.states) * sm.segment.len * A)
            throw std::runtime_error("model emission tensor size mismatch");
        model.segments.push_back(std::move(sm));
    }

    Segmentation seg;
    for (const auto& sm : model.segments) seg.segments.push_back(sm.segment);
    seg.validate(model.sequence_length());
    return model;
}

void save_model(const SegmentationModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model_to_json(model).dump(2) << '\n';
}

SegmentationModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    Json j;
    in >> j;
    return model_from_json(j);
}

Json segmentation_to_json(const Segmentation& seg, double total_score,
                          const Json& provenance) {
    Json j;
    j["format"] = "segmix-segmentation-v1";
    j["length"] = seg.length();
    j["total_score"] = total_score;
    Json segs = Json::array();
    for (const auto& s : seg.segments) {
        Json e;
        e["start"] = s.start + 1;
        e["length"] = s.len;
        e["cardinality"] = s.states;
        segs.push_back(std::move(e));
    }
    j["segments"] = std::move(segs);
    j["provenance"] = provenance;
    return j;
}

}  // namespace segmix
