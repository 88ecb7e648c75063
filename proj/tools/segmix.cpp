// segmix: optimal segmentation of aligned discrete sequences into
// independent mixture models, with imputation, typing, tag selection, and
// evaluation protocols on top of the learned model.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "segmix/eval.hpp"
#include "segmix/kernels.hpp"
#include "segmix/parallel.hpp"
#include "segmix/rng.hpp"

namespace fs = std::filesystem;
using namespace segmix;

namespace {

struct InputOptions {
    std::string path;
    std::string format = "matrix";
    std::string missing = "?";
    std::string delimiter;
    std::string alphabet;  // comma-separated explicit symbols

    void attach(CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("-i,--input", path, "input alignment file");
        if (required) opt->required();
        cmd->add_option("--format", format, "input format: matrix|fasta")
            ->check(CLI::IsMember({"matrix", "fasta"}))
            ->capture_default_str();
        cmd->add_option("--missing", missing, "missing-value token")
            ->capture_default_str();
        cmd->add_option("--delimiter", delimiter,
                        "token delimiter for multi-character symbols");
        cmd->add_option("--alphabet", alphabet,
                        "explicit comma-separated alphabet (fixes symbol order)");
    }

    AlignedDataset load() const {
        ParseOptions opts;
        opts.missing_token = missing;
        if (!delimiter.empty()) {
            if (delimiter.size() != 1)
                throw std::runtime_error("--delimiter must be a single character");
            opts.delimiter = delimiter[0];
        }
        if (!alphabet.empty()) {
            std::vector<std::string> symbols;
            std::stringstream ss(alphabet);
            std::string tok;
            while (std::getline(ss, tok, ',')) symbols.push_back(tok);
            opts.alphabet = Alphabet(symbols);
        }
        return parse_alignment_file(
            path, format == "fasta" ? TextFormat::Fasta : TextFormat::Matrix, opts);
    }
};

struct RunOptions {
    std::string score = "cv";
    int cv_folds = 5;
    int cmax = 5;
    int lmax = 50;
    int restarts = 10;
    int final_restarts = 25;
    double prior = 0.0;  // 0 = 1/A
    double weight_prior = 0.0;
    uint64_t seed = 42;
    int jobs = 0;  // 0 = hardware
    bool prune = false;
    double prune_slack = 5.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--score", score, "segment score: bic|cs|cv")
            ->check(CLI::IsMember({"bic", "cs", "cv", "mdl"}))
            ->capture_default_str();
        cmd->add_option("--cv-folds", cv_folds, "folds for the CV segment score")
            ->capture_default_str();
        cmd->add_option("--max-card", cmax, "maximum hidden-variable cardinality")
            ->capture_default_str();
        cmd->add_option("--max-seglen", lmax, "maximum segment length")
            ->capture_default_str();
        cmd->add_option("--restarts", restarts, "EM restarts while scoring")
            ->capture_default_str();
        cmd->add_option("--final-restarts", final_restarts,
                        "EM restarts for the final model fits")
            ->capture_default_str();
        cmd->add_option("--prior", prior,
                        "Dirichlet emission concentration (0 = 1/alphabet size)")
            ->capture_default_str();
        cmd->add_option("--weight-prior", weight_prior,
                        "pseudocounts on mixture weights")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "master seed")->capture_default_str();
        cmd->add_option("-j,--jobs", jobs, "worker threads (0 = all cores)")
            ->capture_default_str();
        cmd->add_flag("--prune", prune, "enable score-table pruning heuristics");
        cmd->add_option("--prune-slack", prune_slack,
                        "slack for the pruning drop rules")
            ->capture_default_str();
    }

    DirichletPrior resolve_prior(int alphabet_size) const {
        DirichletPrior p;
        p.emission_concentration = prior > 0.0 ? prior : 1.0 / alphabet_size;
        p.weight_concentration = weight_prior;
        return p;
    }

    ScoreConfig score_config(int alphabet_size) const {
        ScoreConfig cfg;
        cfg.prior = resolve_prior(alphabet_size);
        cfg.restarts = restarts;
        cfg.seed = seed;
        cfg.cv_folds = cv_folds;
        return cfg;
    }

    PruneConfig prune_config() const { return {prune, prune_slack}; }
    int resolved_jobs() const { return jobs > 0 ? jobs : default_jobs(); }
};

// Everything that determines the results; excludes jobs and output paths so
// reruns at any parallelism level emit identical bytes.
Json provenance_block(const InputOptions& in, const RunOptions& run,
                      const std::string& method, int alphabet_size) {
    Json j;
    j["input"] = in.path;
    j["format"] = in.format;
    j["missing_token"] = in.missing;
    if (!in.delimiter.empty()) j["delimiter"] = in.delimiter;
    j["method"] = method;
    j["score_kind"] = run.score == "mdl" ? "bic" : run.score;
    j["cv_folds"] = run.cv_folds;
    j["max_cardinality"] = run.cmax;
    j["max_segment_length"] = run.lmax;
    j["restarts"] = run.restarts;
    j["final_restarts"] = run.final_restarts;
    j["prior_emission"] = run.resolve_prior(alphabet_size).emission_concentration;
    j["prior_weight"] = run.weight_prior;
    j["seed"] = run.seed;
    j["prune"] = Json{{"enabled", run.prune}, {"slack", run.prune_slack}};
    return j;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

int cmd_segment(const InputOptions& in, const RunOptions& run,
                const std::string& method, const std::string& out_dir) {
    const AlignedDataset ds = in.load();
    const ScoreKind kind = score_kind_from_string(run.score);
    const ScoreConfig cfg = run.score_config(ds.alphabet.size());
    fs::create_directories(out_dir);

    const fs::path scores_path = fs::path(out_dir) / "scores.tsv";
    ScoreTable resume;
    bool have_resume = false;
    if (fs::exists(scores_path)) {
        std::ifstream sin(scores_path);
        resume = ScoreTable::read_tsv(sin);
        if (resume.kind() != kind || resume.seed() != run.seed ||
            resume.L() != ds.n_cols || resume.Lmax() != std::min(run.lmax, ds.n_cols) ||
            resume.Cmax() != run.cmax ||
            (kind == ScoreKind::CV && resume.cv_folds() != run.cv_folds))
            throw std::runtime_error(
                scores_path.string() +
                " was built with different settings; remove it or change --out");
        have_resume = true;
        std::cerr << "resuming from " << scores_path.string() << " ("
                  << resume.scored_count() << " of " << resume.candidate_count()
                  << " candidates)\n";
    }

    std::cerr << "scoring " << ds.n_cols << " positions (Lmax=" << run.lmax
              << ", Cmax=" << run.cmax << ", score=" << to_string(kind)
              << ", jobs=" << run.resolved_jobs()
              << ", kernel=" << kern::backend_name(kern::active_backend()) << ")\n";
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PruneLogEntry> prune_log;
    std::vector<int> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    const ScoreTable table = build_score_table(
        ds, rows, kind, run.cmax, run.lmax, cfg, run.prune_config(),
        run.resolved_jobs(), &prune_log, have_resume ? &resume : nullptr,
        [&](int done, int total) {
            if (done % 100 == 0 || done == total)
                std::cerr << "  scored start positions " << done << "/" << total
                          << "\n";
        });
    const auto t1 = std::chrono::steady_clock::now();
    std::cerr << "table built in " << std::chrono::duration<double>(t1 - t0).count()
              << " s";
    if (!prune_log.empty()) std::cerr << " (" << prune_log.size() << " skips)";
    std::cerr << "\n";

    {
        std::ostringstream ss;
        table.write_tsv(ss);
        write_text_file(scores_path, ss.str());
    }

    auto [seg, total] = method == "greedy" ? greedy_segmentation(table)
                                           : optimal_segmentation(table);

    EmConfig final_cfg;
    final_cfg.restarts = run.final_restarts;
    final_cfg.objective = FitObjective::MAP;
    final_cfg.seed = run.seed;
    SegmentationModel model = assemble_model(ds, seg, cfg.prior, final_cfg);

    const Json prov = provenance_block(in, run, method, ds.alphabet.size());
    model.provenance = prov;

    Json seg_json = segmentation_to_json(seg, total, prov);
    int correlated = 0;
    for (const auto& s : seg.segments) correlated += s.correlated();
    seg_json["correlated_segments"] = correlated;

    write_text_file(fs::path(out_dir) / "segmentation.json", json_text(seg_json));
    write_text_file(fs::path(out_dir) / "model.json", json_text(model_to_json(model)));

    Json run_json = prov;
    run_json["jobs"] = run.resolved_jobs();
    run_json["output_dir"] = out_dir;
    write_text_file(fs::path(out_dir) / "run.json", json_text(run_json));

    std::cerr << "segments: " << seg.segments.size() << " (" << correlated
              << " correlated), total score " << total << "\n";
    return 0;
}

// Rows of the input re-parsed against the model's alphabet.
AlignedDataset load_for_model(const SegmentationModel& model, InputOptions in) {
    if (in.missing.empty()) in.missing = model.missing_token;
    ParseOptions opts;
    opts.missing_token = in.missing;
    if (!in.delimiter.empty()) opts.delimiter = in.delimiter[0];
    opts.alphabet = model.alphabet;
    AlignedDataset ds = parse_alignment_file(
        in.path, in.format == "fasta" ? TextFormat::Fasta : TextFormat::Matrix, opts);
    if (ds.n_cols != model.sequence_length())
        throw std::runtime_error("input length " + std::to_string(ds.n_cols) +
                                 " does not match model length " +
                                 std::to_string(model.sequence_length()));
    return ds;
}

int cmd_impute(const std::string& model_path, const InputOptions& in,
               const std::string& out_dir) {
    const SegmentationModel model = load_model(model_path);
    const AlignedDataset ds = load_for_model(model, in);
    fs::create_directories(out_dir);

    AlignedDataset completed = ds;
    std::ostringstream cells_tsv, marks;
    cells_tsv << "# segmix impute model=" << model_path << " input=" << in.path
              << " model_seed=" << model.provenance.value("seed", Json()).dump()
              << "\n";
    cells_tsv << "row\tcol\tpredicted\tposterior\n";
    char buf[64];
    for (int r = 0; r < ds.n_rows; ++r) {
        auto [filled, cells] = impute_missing(model, ds.row(r));
        std::copy(filled.begin(), filled.end(),
                  completed.entries.begin() + static_cast<size_t>(r) * ds.n_cols);
        for (const auto& cell : cells) {
            std::snprintf(buf, sizeof(buf), "%.6f", cell.posterior);
            cells_tsv << (r + 1) << '\t' << (cell.col + 1) << '\t'
                      << model.alphabet.symbol(cell.symbol) << '\t' << buf << '\n';
        }
        // side report: completed row plus carets under the imputed positions
        std::string line, caret;
        for (int col = 0; col < ds.n_cols; ++col) {
            const std::string sym = model.alphabet.symbol(completed.at(r, col));
            line += sym;
            caret += std::string(sym.size(), ds.at(r, col) == kMissing ? '^' : ' ');
        }
        marks << line << '\n' << caret << '\n';
    }

    std::ostringstream matrix;
    serialize_alignment(completed, matrix, TextFormat::Matrix);
    write_text_file(fs::path(out_dir) / "imputed.txt", matrix.str());
    write_text_file(fs::path(out_dir) / "imputed_cells.tsv", cells_tsv.str());
    write_text_file(fs::path(out_dir) / "impute_report.txt", marks.str());
    std::cerr << "imputed " << ds.missing_count() << " cells over " << ds.n_rows
              << " rows\n";
    return 0;
}

int cmd_type(const std::string& model_path, const InputOptions& in,
             const std::string& out_dir) {
    const SegmentationModel model = load_model(model_path);
    const AlignedDataset ds = load_for_model(model, in);
    fs::create_directories(out_dir);

    std::ostringstream tsv;
    tsv << "# segmix type model=" << model_path << " input=" << in.path
        << " model_seed=" << model.provenance.value("seed", Json()).dump() << "\n";
    tsv << "row\tsegment\tstart\tlength\ttype\tposterior\n";
    char buf[64];
    for (int r = 0; r < ds.n_rows; ++r) {
        const auto types = assign_types(model, ds.row(r));
        for (const auto& t : types) {
            const auto& seg = model.segments[t.segment_index].segment;
            std::snprintf(buf, sizeof(buf), "%.6f", t.posterior);
            tsv << (r + 1) << '\t' << (t.segment_index + 1) << '\t' << (seg.start + 1)
                << '\t' << seg.len << '\t'
                << (t.correlated ? std::to_string(t.state + 1) : std::string("IND"))
                << '\t' << buf << '\n';
        }
    }
    write_text_file(fs::path(out_dir) / "types.tsv", tsv.str());
    return 0;
}

int cmd_tags(const std::string& model_path, int segment_index, int budget,
             long long max_configs, const std::string& out_dir) {
    const SegmentationModel model = load_model(model_path);
    const TagSelection sel =
        select_tags(model, segment_index - 1, budget, max_configs);
    const auto& seg = model.segments[segment_index - 1].segment;

    std::ostringstream tsv;
    tsv << "# segmix tags model=" << model_path << " segment=" << segment_index
        << " budget=" << budget
        << " model_seed=" << model.provenance.value("seed", Json()).dump() << "\n";
    tsv << "rank\tposition\tcumulative_mi\thidden_entropy\n";
    char buf[64], buf2[64];
    for (size_t i = 0; i < sel.positions.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", sel.cumulative_mi[i]);
        std::snprintf(buf2, sizeof(buf2), "%.9g", sel.hidden_entropy);
        tsv << (i + 1) << '\t' << (seg.start + sel.positions[i] + 1) << '\t' << buf
            << '\t' << buf2 << '\n';
    }
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "tags.tsv", tsv.str());
    std::cout << tsv.str();
    return 0;
}

int cmd_eval(const InputOptions& in, const RunOptions& run,
             const std::string& protocol, const std::string& methods_csv,
             int protocol_folds, const std::string& rates_csv, int repeats,
             const std::string& majority_mode, const std::string& out_dir) {
    const AlignedDataset ds = in.load();
    EvalConfig cfg;
    cfg.scoring = run.score_config(ds.alphabet.size());
    cfg.cmax = run.cmax;
    cfg.lmax = run.lmax;
    cfg.final_restarts = run.final_restarts;
    cfg.jobs = run.resolved_jobs();
    cfg.prune = run.prune_config();
    cfg.majority_global = majority_mode == "global";

    EvalReport report;
    if (protocol == "holdout") {
        std::vector<MethodSpec> methods;
        std::stringstream ss(methods_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) methods.push_back(MethodSpec::parse(tok));
        report = kfold_holdout_eval(ds, methods, protocol_folds, run.seed, cfg);
        for (size_t m = 0; m < report.methods.size(); ++m)
            std::cerr << report.methods[m] << ": total " << report.totals[m]
                      << ", relative vs ind " << report.relative_totals[m] << "\n";
        for (const auto& pt : report.pair_tests)
            std::cerr << report.methods[pt.method_a] << " vs "
                      << report.methods[pt.method_b] << ": " << pt.wins_a << "/"
                      << pt.wins_b << " wins (" << pt.ties
                      << " ties), p = " << pt.p_value << "\n";
    } else {
        std::vector<double> rates;
        std::stringstream ss(rates_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) rates.push_back(std::stod(tok));
        // the mask protocol trains one method; take the first if several given
        const MethodSpec method =
            MethodSpec::parse(methods_csv.substr(0, methods_csv.find(',')));
        report = missing_value_experiment(ds, rates, repeats, method, run.seed, cfg);
        for (size_t ri = 0; ri < report.rates.size(); ++ri) {
            const auto& s = report.rate_summaries[ri];
            std::fprintf(
                stderr,
                "rate %.3f: %s error %.4f (sd %.4f), majority %.4f (sd %.4f)\n",
                report.rates[ri], report.imputation_method.c_str(), s.model_mean,
                s.model_stddev, s.majority_mean, s.majority_stddev);
        }
    }

    fs::create_directories(out_dir);
    Json j = eval_report_to_json(report);
    j["protocol"] = protocol;
    j["provenance"] = provenance_block(
        in, run, protocol == "holdout" ? methods_csv : methods_csv,
        ds.alphabet.size());
    write_text_file(fs::path(out_dir) / "report.json", json_text(j));
    std::ostringstream tsv;
    write_long_tsv(report, tsv);
    write_text_file(fs::path(out_dir) / "report.tsv", tsv.str());
    return 0;
}

int cmd_gen(int n, int length, int alphabet_size, int block_length, int types,
            double noise, double missing, uint64_t seed, const std::string& out_dir) {
    const PlantedData planted = generate_planted_blocks(
        n, length, alphabet_size, block_length, types, noise, missing, seed);
    fs::create_directories(out_dir);

    std::ostringstream matrix;
    serialize_alignment(planted.data, matrix, TextFormat::Matrix);
    write_text_file(fs::path(out_dir) / "data.txt", matrix.str());

    Json truth;
    truth["format"] = "segmix-truth-v1";
    truth["length"] = length;
    truth["seed"] = seed;
    truth["noise"] = noise;
    truth["missing_rate"] = missing;
    Json segs = Json::array();
    for (const auto& s : planted.truth.segments)
        segs.push_back(
            Json{{"start", s.start + 1}, {"length", s.len}, {"cardinality", s.states}});
    truth["segments"] = std::move(segs);
    Json bounds = Json::array();
    for (int b : planted.truth.internal_boundaries()) bounds.push_back(b + 1);
    truth["internal_boundaries"] = std::move(bounds);
    write_text_file(fs::path(out_dir) / "truth.json", json_text(truth));
    std::cerr << "wrote " << n << "x" << length << " matrix ("
              << planted.data.missing_count() << " missing cells)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal segmentation of aligned sequences into mixture models"};
    app.require_subcommand(1);

    InputOptions in;
    RunOptions run;
    std::string out_dir = ".";
    std::string method = "dp";

    auto* segment = app.add_subcommand("segment", "score, segment, and fit the model");
    in.attach(segment);
    run.attach(segment);
    segment->add_option("--method", method, "segmentation algorithm: dp|greedy")
        ->check(CLI::IsMember({"dp", "greedy"}))
        ->capture_default_str();
    segment->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

    std::string model_path;
    auto* impute = app.add_subcommand("impute", "fill missing cells using a model");
    impute->add_option("-m,--model", model_path, "model.json path")->required();
    InputOptions impute_in;
    impute_in.attach(impute);
    std::string impute_out = ".";
    impute->add_option("-o,--out", impute_out, "output directory")
        ->capture_default_str();

    auto* type = app.add_subcommand("type", "assign per-segment types to rows");
    std::string type_model;
    type->add_option("-m,--model", type_model, "model.json path")->required();
    InputOptions type_in;
    type_in.attach(type);
    std::string type_out = ".";
    type->add_option("-o,--out", type_out, "output directory")->capture_default_str();

    auto* tags = app.add_subcommand("tags", "select high-information tag positions");
    std::string tags_model;
    int tags_segment = 1, tags_budget = 1;
    long long tags_configs = 2000000;
    std::string tags_out = ".";
    tags->add_option("-m,--model", tags_model, "model.json path")->required();
    tags->add_option("--segment", tags_segment, "1-based segment index")->required();
    tags->add_option("--budget", tags_budget, "number of positions to pick")
        ->required();
    tags->add_option("--max-configs", tags_configs,
                     "enumeration cap for the MI computation")
        ->capture_default_str();
    tags->add_option("-o,--out", tags_out, "output directory")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "held-out or missing-value protocols");
    InputOptions eval_in;
    eval_in.attach(eval);
    RunOptions eval_run;
    eval_run.attach(eval);
    std::string protocol = "holdout";
    std::string methods_csv = "dp+cv,ind";
    int protocol_folds = 10;
    std::string rates_csv = "0.01,0.05,0.10";
    int repeats = 10;
    std::string majority_mode = "column";
    std::string eval_out = ".";
    eval->add_option("--protocol", protocol, "holdout|missing")
        ->check(CLI::IsMember({"holdout", "missing"}))
        ->capture_default_str();
    eval->add_option("--methods", methods_csv,
                     "comma-separated methods (holdout) or one method (missing)")
        ->capture_default_str();
    eval->add_option("--folds", protocol_folds, "holdout evaluation folds")
        ->capture_default_str();
    eval->add_option("--rates", rates_csv, "missing rates for the mask protocol")
        ->capture_default_str();
    eval->add_option("--repeats", repeats, "repeats per missing rate")
        ->capture_default_str();
    eval->add_option("--majority", majority_mode, "majority baseline: column|global")
        ->check(CLI::IsMember({"column", "global"}))
        ->capture_default_str();
    eval->add_option("-o,--out", eval_out, "output directory")->capture_default_str();

    auto* gen = app.add_subcommand("gen", "generate blocked synthetic data");
    int gen_n = 40, gen_len = 60, gen_a = 2, gen_block = 10, gen_types = 3;
    double gen_noise = 0.05, gen_missing = 0.05;
    uint64_t gen_seed = 1;
    std::string gen_out = ".";
    gen->add_option("--n", gen_n, "rows")->capture_default_str();
    gen->add_option("--length", gen_len, "positions")->capture_default_str();
    gen->add_option("--alphabet-size", gen_a, "alphabet size")->capture_default_str();
    gen->add_option("--block-length", gen_block, "planted block length")
        ->capture_default_str();
    gen->add_option("--types", gen_types, "archetypes per block")
        ->capture_default_str();
    gen->add_option("--noise", gen_noise, "per-symbol flip probability")
        ->capture_default_str();
    gen->add_option("--missing", gen_missing, "fraction of cells hidden")
        ->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (segment->parsed()) return cmd_segment(in, run, method, out_dir);
        if (impute->parsed()) return cmd_impute(model_path, impute_in, impute_out);
        if (type->parsed()) return cmd_type(type_model, type_in, type_out);
        if (tags->parsed())
            return cmd_tags(tags_model, tags_segment, tags_budget, tags_configs,
                            tags_out);
        if (eval->parsed())
            return cmd_eval(eval_in, eval_run, protocol, methods_csv, protocol_folds,
                            rates_csv, repeats, majority_mode, eval_out);
        if (gen->parsed())
            return cmd_gen(gen_n, gen_len, gen_a, gen_block, gen_types, gen_noise,
                           gen_missing, gen_seed, gen_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
