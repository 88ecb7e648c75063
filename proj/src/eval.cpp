#include "segmix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "segmix/rng.hpp"

namespace segmix {

MethodSpec MethodSpec::parse(const std::string& text) {
    MethodSpec m;
    m.name = text;
    if (text == "ind") {
        m.algo = Algo::Ind;
        return m;
    }
    if (text == "clust") {
        m.algo = Algo::Clust;
        return m;
    }
    const auto plus = text.find('+');
    const std::string algo = plus == std::string::npos ? text : text.substr(0, plus);
    const std::string kind = plus == std::string::npos ? "cv" : text.substr(plus + 1);
    if (algo == "dp")
        m.algo = Algo::DP;
    else if (algo == "greedy")
        m.algo = Algo::Greedy;
    else
        throw std::invalid_argument("unknown method '" + text +
                                    "' (expected ind|clust|dp+KIND|greedy+KIND)");
    m.kind = score_kind_from_string(kind);
    m.name = algo + "+" + to_string(m.kind);
    return m;
}

SegmentationModel train_method(const AlignedDataset& ds, std::span<const int> rows,
                               const MethodSpec& method, const EvalConfig& cfg,
                               uint64_t seed) {
    const AlignedDataset train = subset_rows(ds, rows);
    const DirichletPrior prior = cfg.scoring.prior;

    EmConfig final_cfg;
    final_cfg.restarts = cfg.final_restarts;
    final_cfg.max_iterations = cfg.scoring.max_iterations;
    final_cfg.tolerance = cfg.scoring.tolerance;
    final_cfg.objective = FitObjective::MAP;
    final_cfg.seed = seed;

    switch (method.algo) {
        case MethodSpec::Algo::Ind:
            return build_ind_baseline(train, prior);
        case MethodSpec::Algo::Clust: {
            ScoreConfig sc = cfg.scoring;
            sc.seed = seed;
            return build_clust_baseline(train, cfg.cmax, sc.cv_folds, sc, final_cfg);
        }
        case MethodSpec::Algo::DP:
        case MethodSpec::Algo::Greedy: {
            ScoreConfig sc = cfg.scoring;
            sc.seed = seed;
            const ScoreTable table = build_score_table(
                train, method.kind, cfg.cmax, cfg.lmax, sc, cfg.prune, cfg.jobs);
            auto [seg, total] = method.algo == MethodSpec::Algo::DP
                                    ? optimal_segmentation(table)
                                    : greedy_segmentation(table);
            (void)total;
            return assemble_model(train, seg, prior, final_cfg);
        }
    }
    throw std::logic_error("unreachable method algo");
}

namespace {

// Per-fold method training with one shared score table per score kind:
// DP and Greedy over the same kind read the same table.
std::vector<SegmentationModel> train_fold_methods(
    const AlignedDataset& ds, std::span<const int> rows,
    const std::vector<MethodSpec>& methods, const EvalConfig& cfg, uint64_t seed) {
    const AlignedDataset train = subset_rows(ds, rows);
    const DirichletPrior prior = cfg.scoring.prior;

    EmConfig final_cfg;
    final_cfg.restarts = cfg.final_restarts;
    final_cfg.max_iterations = cfg.scoring.max_iterations;
    final_cfg.tolerance = cfg.scoring.tolerance;
    final_cfg.objective = FitObjective::MAP;
    final_cfg.seed = seed;

    std::map<ScoreKind, ScoreTable> tables;
    auto table_for = [&](ScoreKind kind) -> const ScoreTable& {
        auto it = tables.find(kind);
        if (it == tables.end()) {
            ScoreConfig sc = cfg.scoring;
            sc.seed = seed;
            it = tables
                     .emplace(kind, build_score_table(train, kind, cfg.cmax, cfg.lmax,
                                                      sc, cfg.prune, cfg.jobs))
                     .first;
        }
        return it->second;
    };

    std::vector<SegmentationModel> models;
    models.reserve(methods.size());
    for (const auto& method : methods) {
        switch (method.algo) {
            case MethodSpec::Algo::Ind:
                models.push_back(build_ind_baseline(train, prior));
                break;
            case MethodSpec::Algo::Clust: {
                ScoreConfig sc = cfg.scoring;
                sc.seed = seed;
                models.push_back(
                    build_clust_baseline(train, cfg.cmax, sc.cv_folds, sc, final_cfg));
                break;
            }
            case MethodSpec::Algo::DP:
            case MethodSpec::Algo::Greedy: {
                const ScoreTable& table = table_for(method.kind);
                auto [seg, total] = method.algo == MethodSpec::Algo::DP
                                        ? optimal_segmentation(table)
                                        : greedy_segmentation(table);
                (void)total;
                models.push_back(assemble_model(train, seg, prior, final_cfg));
                break;
            }
        }
    }
    return models;
}

double sample_stddev(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
}

}  // namespace

EvalReport kfold_holdout_eval(const AlignedDataset& ds,
                              std::vector<MethodSpec> methods, int folds,
                              uint64_t seed, const EvalConfig& cfg,
                              const FoldHook& hook) {
    if (folds < 2 || folds > ds.n_rows)
        throw std::invalid_argument("holdout folds must be in [2, N]");
    bool have_ind = false;
    for (const auto& m : methods) have_ind |= m.algo == MethodSpec::Algo::Ind;
    if (!have_ind) methods.push_back(MethodSpec::parse("ind"));

    const std::vector<int> fold = fold_assignments(
        ds.n_rows, folds,
        derive_seed({seed, stream::kHoldout, static_cast<uint64_t>(folds),
                     static_cast<uint64_t>(ds.n_rows)}));

    EvalReport report;
    report.seed = seed;
    for (const auto& m : methods) report.methods.push_back(m.name);
    report.test_loglik.assign(methods.size(),
                              std::vector<double>(ds.n_rows, 0.0));

    for (int f = 0; f < folds; ++f) {
        std::vector<int> train, test;
        for (int r = 0; r < ds.n_rows; ++r) (fold[r] == f ? test : train).push_back(r);
        if (train.empty() || test.empty())
            throw std::runtime_error("degenerate fold " + std::to_string(f + 1));
        if (hook) hook(f, train, test);

        const uint64_t fold_seed =
            derive_seed({seed, stream::kHoldout, static_cast<uint64_t>(f)});
        const std::vector<SegmentationModel> models =
            train_fold_methods(ds, train, methods, cfg, fold_seed);
        for (size_t m = 0; m < methods.size(); ++m)
            for (int r : test)
                report.test_loglik[m][r] = model_loglik(models[m], ds.row(r));
    }

    int ind_index = 0;
    for (size_t m = 0; m < methods.size(); ++m)
        if (methods[m].algo == MethodSpec::Algo::Ind) ind_index = static_cast<int>(m);

    report.totals.resize(methods.size());
    report.relative_totals.resize(methods.size());
    for (size_t m = 0; m < methods.size(); ++m)
        report.totals[m] = std::accumulate(report.test_loglik[m].begin(),
                                           report.test_loglik[m].end(), 0.0);
    for (size_t m = 0; m < methods.size(); ++m)
        report.relative_totals[m] = report.totals[m] - report.totals[ind_index];

    for (size_t a = 0; a < methods.size(); ++a)
        for (size_t b = a + 1; b < methods.size(); ++b) {
            EvalReport::PairTest pt;
            pt.method_a = static_cast<int>(a);
            pt.method_b = static_cast<int>(b);
            std::vector<std::pair<double, double>> pairs;
            for (int r = 0; r < ds.n_rows; ++r) {
                const double va = report.test_loglik[a][r];
                const double vb = report.test_loglik[b][r];
                if (va > vb)
                    ++pt.wins_a;
                else if (vb > va)
                    ++pt.wins_b;
                else
                    ++pt.ties;
                pairs.emplace_back(va, vb);
            }
            pt.p_value = (pt.wins_a + pt.wins_b) == 0
                             ? std::numeric_limits<double>::quiet_NaN()
                             : sign_test(pairs);
            report.pair_tests.push_back(pt);
        }
    return report;
}

double sign_test(std::span<const std::pair<double, double>> pairs) {
    long long wins = 0, losses = 0;
    for (const auto& [a, b] : pairs) {
        if (a > b)
            ++wins;
        else if (b > a)
            ++losses;
    }
    const long long n = wins + losses;
    if (n == 0) throw std::invalid_argument("sign test: every pair is tied");
    const long long m = std::min(wins, losses);
    long double term = std::pow(0.5L, static_cast<long double>(n));  // C(n,0)/2^n
    long double tail = term;
    for (long long i = 1; i <= m; ++i) {
        term *= static_cast<long double>(n - i + 1) / static_cast<long double>(i);
        tail += term;
    }
    return static_cast<double>(std::min(1.0L, 2.0L * tail));
}

EvalReport missing_value_experiment(const AlignedDataset& ds,
                                    std::span<const double> rates, int repeats,
                                    const MethodSpec& method, uint64_t seed,
                                    const EvalConfig& cfg) {
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    for (double r : rates)
        if (r <= 0.0 || r >= 1.0)
            throw std::invalid_argument("missing rates must lie in (0,1)");

    EvalReport report;
    report.seed = seed;
    report.imputation_method = method.name;
    report.rates.assign(rates.begin(), rates.end());
    report.imputation.resize(rates.size());

    for (size_t ri = 0; ri < rates.size(); ++ri) {
        report.imputation[ri].resize(repeats);
        for (int rep = 0; rep < repeats; ++rep) {
            const uint64_t cell_seed = derive_seed(
                {seed, stream::kMask, static_cast<uint64_t>(ri),
                 static_cast<uint64_t>(rep)});
            auto [masked, record] = mask_entries(ds, rates[ri], cell_seed);
            auto& cell = report.imputation[ri][rep];
            cell.n_masked = static_cast<long long>(record.cells.size());
            if (record.cells.empty()) continue;  // error rate undefined
            cell.present = true;

            std::vector<int> rows(masked.n_rows);
            std::iota(rows.begin(), rows.end(), 0);
            const SegmentationModel model =
                train_method(masked, rows, method, cfg, cell_seed);

            long long model_wrong = 0, majority_wrong = 0;
            const int16_t global = global_majority(masked);
            std::vector<int16_t> column_pred(masked.n_cols, kMissing);
            for (int col = 0; col < masked.n_cols; ++col) {
                if (cfg.majority_global) {
                    column_pred[col] = global;
                } else {
                    column_pred[col] = masked.column_observed_count(col) > 0
                                           ? column_majority(masked, col)
                                           : global;
                }
            }

            int prev_row = -1;
            std::vector<int16_t> completed;
            for (const auto& mc : record.cells) {
                if (mc.row != prev_row) {
                    completed = impute_missing(model, masked.row(mc.row)).first;
                    prev_row = mc.row;
                }
                model_wrong += completed[mc.col] != mc.original;
                majority_wrong += column_pred[mc.col] != mc.original;
            }
            cell.model_error =
                static_cast<double>(model_wrong) / static_cast<double>(cell.n_masked);
            cell.majority_error = static_cast<double>(majority_wrong) /
                                  static_cast<double>(cell.n_masked);
        }
    }

    for (size_t ri = 0; ri < rates.size(); ++ri) {
        EvalReport::RateSummary s;
        std::vector<double> me, be;
        for (const auto& cell : report.imputation[ri]) {
            if (!cell.present) continue;
            me.push_back(cell.model_error);
            be.push_back(cell.majority_error);
        }
        s.n_present = static_cast<int>(me.size());
        if (!me.empty()) {
            s.model_mean = std::accumulate(me.begin(), me.end(), 0.0) / me.size();
            s.majority_mean = std::accumulate(be.begin(), be.end(), 0.0) / be.size();
            s.model_stddev = sample_stddev(me, s.model_mean);
            s.majority_stddev = sample_stddev(be, s.majority_mean);
        }
        report.rate_summaries.push_back(s);
    }
    return report;
}

PlantedData generate_planted_blocks(int n_rows, int length, int alphabet_size,
                                    int block_length, int types_per_block,
                                    double noise, double missing_rate,
                                    uint64_t seed) {
    if (n_rows < 1 || length < 1) throw std::invalid_argument("need N >= 1, L >= 1");
    if (alphabet_size < 2) throw std::invalid_argument("alphabet size must be >= 2");
    if (block_length < 1) throw std::invalid_argument("block length must be >= 1");
    if (types_per_block < 1) throw std::invalid_argument("types per block must be >= 1");
    if (noise < 0.0 || noise >= 0.5)
        throw std::invalid_argument("noise must lie in [0, 0.5)");
    if (missing_rate < 0.0 || missing_rate >= 1.0)
        throw std::invalid_argument("missing rate must lie in [0, 1)");

    std::vector<std::string> symbols;
    for (int v = 0; v < alphabet_size; ++v) {
        if (alphabet_size <= 26)
            symbols.emplace_back(1, static_cast<char>('A' + v));
        else
            symbols.push_back("s" + std::to_string(v));
    }

    PlantedData out;
    out.data.alphabet = Alphabet(symbols);
    out.data.missing_token = "?";
    out.data.n_rows = n_rows;
    out.data.n_cols = length;
    out.data.entries.resize(static_cast<size_t>(n_rows) * length);
    for (int r = 0; r < n_rows; ++r)
        out.data.row_labels.push_back("seq" + std::to_string(r + 1));

    std::vector<Segment> blocks;
    for (int start = 0; start < length; start += block_length) {
        const int len = std::min(block_length, length - start);
        blocks.push_back({start, len, len == 1 ? 1 : types_per_block});
    }
    out.truth.segments = blocks;

    Rng arch_rng(derive_seed({seed, stream::kPlanted, 1}));
    std::vector<std::vector<int16_t>> archetypes;  // [block*types][len]
    for (const auto& block : blocks)
        for (int t = 0; t < types_per_block; ++t) {
            std::vector<int16_t> a(block.len);
            for (auto& v : a)
                v = static_cast<int16_t>(arch_rng.next_below(alphabet_size));
            archetypes.push_back(std::move(a));
        }

    Rng row_rng(derive_seed({seed, stream::kPlanted, 2}));
    for (int r = 0; r < n_rows; ++r) {
        for (size_t b = 0; b < blocks.size(); ++b) {
            const auto& block = blocks[b];
            const int t = static_cast<int>(row_rng.next_below(types_per_block));
            const auto& arch = archetypes[b * types_per_block + t];
            for (int i = 0; i < block.len; ++i) {
                int16_t v = arch[i];
                if (noise > 0.0 && row_rng.next_double() < noise) {
                    // replace with a uniformly random different symbol
                    int16_t w =
                        static_cast<int16_t>(row_rng.next_below(alphabet_size - 1));
                    v = w >= v ? static_cast<int16_t>(w + 1) : w;
                }
                out.data.entries[static_cast<size_t>(r) * length + block.start + i] = v;
            }
        }
    }

    if (missing_rate > 0.0) {
        auto [masked, record] = mask_entries(
            out.data, missing_rate, derive_seed({seed, stream::kPlanted, 3}));
        (void)record;
        out.data = std::move(masked);
    }
    return out;
}

BoundaryScore boundary_score(const Segmentation& predicted,
                             const Segmentation& truth) {
    const std::vector<int> pv = predicted.internal_boundaries();
    const std::vector<int> tv = truth.internal_boundaries();
    const std::set<int> p(pv.begin(), pv.end());
    const std::set<int> t(tv.begin(), tv.end());
    int hits = 0;
    for (int b : p) hits += t.count(b) > 0;

    BoundaryScore s;
    if (p.empty() && t.empty()) {
        s.precision = s.recall = s.f1 = 1.0;
        return s;
    }
    s.precision = p.empty() ? 0.0 : static_cast<double>(hits) / p.size();
    s.recall = t.empty() ? 0.0 : static_cast<double>(hits) / t.size();
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

Json eval_report_to_json(const EvalReport& report) {
    Json j;
    j["seed"] = report.seed;
    if (!report.methods.empty()) {
        j["methods"] = report.methods;
        Json loglik = Json::object();
        for (size_t m = 0; m < report.methods.size(); ++m)
            loglik[report.methods[m]] = report.test_loglik[m];
        j["test_loglik"] = std::move(loglik);
        Json totals = Json::object(), relative = Json::object();
        for (size_t m = 0; m < report.methods.size(); ++m) {
            totals[report.methods[m]] = report.totals[m];
            relative[report.methods[m]] = report.relative_totals[m];
        }
        j["totals"] = std::move(totals);
        j["relative_totals_vs_ind"] = std::move(relative);
        Json pairs = Json::array();
        for (const auto& pt : report.pair_tests) {
            Json p;
            p["method_a"] = report.methods[pt.method_a];
            p["method_b"] = report.methods[pt.method_b];
            p["wins_a"] = pt.wins_a;
            p["wins_b"] = pt.wins_b;
            p["ties"] = pt.ties;
            if (std::isnan(pt.p_value))
                p["sign_test_p"] = nullptr;
            else
                p["sign_test_p"] = pt.p_value;
            pairs.push_back(std::move(p));
        }
        j["pair_tests"] = std::move(pairs);
    }
    if (!report.rates.empty()) {
        j["imputation_method"] = report.imputation_method;
        Json rates = Json::array();
        for (size_t ri = 0; ri < report.rates.size(); ++ri) {
            Json rj;
            rj["rate"] = report.rates[ri];
            Json reps = Json::array();
            for (const auto& cell : report.imputation[ri]) {
                Json cj;
                cj["present"] = cell.present;
                cj["n_masked"] = cell.n_masked;
                if (cell.present) {
                    cj["model_error"] = cell.model_error;
                    cj["majority_error"] = cell.majority_error;
                }
                reps.push_back(std::move(cj));
            }
            rj["repeats"] = std::move(reps);
            const auto& s = report.rate_summaries[ri];
            rj["model_mean"] = s.model_mean;
            rj["model_stddev"] = s.model_stddev;
            rj["majority_mean"] = s.majority_mean;
            rj["majority_stddev"] = s.majority_stddev;
            rj["n_present"] = s.n_present;
            rates.push_back(std::move(rj));
        }
        j["imputation"] = std::move(rates);
    }
    return j;
}

void write_long_tsv(const EvalReport& report, std::ostream& out) {
    out << "method\tmetric\tkey\tvalue\n";
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (size_t m = 0; m < report.methods.size(); ++m) {
        for (size_t r = 0; r < report.test_loglik[m].size(); ++r)
            out << report.methods[m] << "\ttest_loglik\tseq" << (r + 1) << '\t'
                << num(report.test_loglik[m][r]) << '\n';
        out << report.methods[m] << "\ttotal\t\t" << num(report.totals[m]) << '\n';
        out << report.methods[m] << "\trelative_total_vs_ind\t\t"
            << num(report.relative_totals[m]) << '\n';
    }
    for (const auto& pt : report.pair_tests) {
        const std::string key =
            report.methods[pt.method_a] + ">" + report.methods[pt.method_b];
        out << report.methods[pt.method_a] << "\twins\t" << key << '\t' << pt.wins_a
            << '\n';
        out << report.methods[pt.method_b] << "\twins\t" << key << '\t' << pt.wins_b
            << '\n';
        out << report.methods[pt.method_a] << "\tsign_test_p\t" << key << '\t'
            << num(pt.p_value) << '\n';
    }
    for (size_t ri = 0; ri < report.rates.size(); ++ri) {
        const std::string rate_key = "rate=" + num(report.rates[ri]);
        for (size_t rep = 0; rep < report.imputation[ri].size(); ++rep) {
            const auto& cell = report.imputation[ri][rep];
            if (!cell.present) continue;
            const std::string key = rate_key + ";rep=" + std::to_string(rep + 1);
            out << report.imputation_method << "\terror\t" << key << '\t'
                << num(cell.model_error) << '\n';
            out << "majority\terror\t" << key << '\t' << num(cell.majority_error)
                << '\n';
        }
        const auto& s = report.rate_summaries[ri];
        out << report.imputation_method << "\terror_mean\t" << rate_key << '\t'
            << num(s.model_mean) << '\n';
        out << report.imputation_method << "\terror_stddev\t" << rate_key << '\t'
            << num(s.model_stddev) << '\n';
        out << "majority\terror_mean\t" << rate_key << '\t' << num(s.majority_mean)
            << '\n';
        out << "majority\terror_stddev\t" << rate_key << '\t'
            << num(s.majority_stddev) << '\n';
    }
}

}  // namespace segmix
