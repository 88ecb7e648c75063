#include "segmix/segment_dp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "segmix/parallel.hpp"

namespace segmix {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string candidate_name(int s, int l, int c) {
    return "(s=" + std::to_string(s + 1) + ", l=" + std::to_string(l) +
           ", c=" + std::to_string(c) + ")";
}
}  // namespace

int Segmentation::length() const {
    int L = 0;
    for (const auto& seg : segments) L += seg.len;
    return L;
}

void Segmentation::validate(int L) const {
    if (segments.empty()) throw std::runtime_error("segmentation is empty");
    int expect = 0;
    for (const auto& seg : segments) {
        if (seg.start != expect)
            throw std::runtime_error("segmentation gap/overlap at position " +
                                     std::to_string(expect + 1));
        if (seg.len < 1) throw std::runtime_error("segment with non-positive length");
        if (seg.len == 1 && seg.states != 1)
            throw std::runtime_error("length-1 segment with hidden variable");
        expect += seg.len;
    }
    if (expect != L)
        throw std::runtime_error("segmentation covers " + std::to_string(expect) +
                                 " positions, expected " + std::to_string(L));
}

std::vector<int> Segmentation::internal_boundaries() const {
    std::vector<int> b;
    for (size_t a = 0; a + 1 < segments.size(); ++a)
        b.push_back(segments[a].end());
    return b;
}

ScoreTable::ScoreTable(int L, int Lmax, int Cmax, ScoreKind kind, uint64_t seed,
                       int cv_folds)
    : L_(L), Lmax_(Lmax), Cmax_(Cmax), kind_(kind), seed_(seed), cv_folds_(cv_folds) {
    if (L < 1) throw std::invalid_argument("score table needs L >= 1");
    if (Lmax < 1) throw std::invalid_argument("score table needs Lmax >= 1");
    if (Cmax < 2) throw std::invalid_argument("score table needs Cmax >= 2");
    const size_t slots = static_cast<size_t>(L) * Lmax_ * Cmax_;
    values_.assign(slots, std::numeric_limits<double>::quiet_NaN());
    states_.assign(slots, CellState::Absent);
}

size_t ScoreTable::index(int s, int l, int c) const {
    return (static_cast<size_t>(s) * Lmax_ + (l - 1)) * Cmax_ + (c - 1);
}

bool ScoreTable::is_candidate(int s, int l, int c) const {
    if (s < 0 || s >= L_ || l < 1 || l > Lmax_ || s + l > L_) return false;
    if (l == 1) return c == 1;
    return c >= 2 && c <= Cmax_;
}

void ScoreTable::require_candidate(int s, int l, int c) const {
    if (!is_candidate(s, l, c))
        throw std::out_of_range("not a table candidate " + candidate_name(s, l, c));
}

CellState ScoreTable::state(int s, int l, int c) const {
    require_candidate(s, l, c);
    return states_[index(s, l, c)];
}

double ScoreTable::value(int s, int l, int c) const {
    require_candidate(s, l, c);
    if (states_[index(s, l, c)] != CellState::Scored)
        throw std::runtime_error("missing table entry " + candidate_name(s, l, c));
    return values_[index(s, l, c)];
}

void ScoreTable::set_scored(int s, int l, int c, double value) {
    require_candidate(s, l, c);
    if (!std::isfinite(value))
        throw std::runtime_error("non-finite score for " + candidate_name(s, l, c));
    values_[index(s, l, c)] = value;
    states_[index(s, l, c)] = CellState::Scored;
}

void ScoreTable::set_skipped(int s, int l, int c) {
    require_candidate(s, l, c);
    states_[index(s, l, c)] = CellState::Skipped;
}

long long ScoreTable::scored_count() const {
    long long n = 0;
    for (CellState st : states_) n += (st == CellState::Scored);
    return n;
}

long long ScoreTable::candidate_count() const {
    long long n = 0;
    for (int l = 1; l <= Lmax_; ++l) {
        const long long starts = L_ - l + 1;
        if (starts <= 0) break;
        n += starts * (l == 1 ? 1 : Cmax_ - 1);
    }
    return n;
}

void ScoreTable::write_tsv(std::ostream& out) const {
    out << "# segmix-scores v1\n";
    out << "# kind=" << to_string(kind_) << " folds=" << cv_folds_ << " seed=" << seed_
        << " L=" << L_ << " lmax=" << Lmax_ << " cmax=" << Cmax_ << "\n";
    out << "# s\tl\tc\tkind\tvalue\n";
    char buf[64];
    for (int s = 0; s < L_; ++s)
        for (int l = 1; l <= Lmax_ && s + l <= L_; ++l)
            for (int c = (l == 1 ? 1 : 2); c <= (l == 1 ? 1 : Cmax_); ++c) {
                if (states_[index(s, l, c)] != CellState::Scored) continue;
                std::snprintf(buf, sizeof(buf), "%.17g", values_[index(s, l, c)]);
                out << (s + 1) << '\t' << l << '\t' << c << '\t' << to_string(kind_)
                    << '\t' << buf << '\n';
            }
}

ScoreTable ScoreTable::read_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# segmix-scores", 0) != 0)
        throw std::runtime_error("score table: bad or missing format header");
    if (!std::getline(in, line) || line.rfind("# kind=", 0) != 0)
        throw std::runtime_error("score table: missing metadata header");

    std::string kind_s;
    int folds = 0, L = 0, Lmax = 0, Cmax = 0;
    unsigned long long seed = 0;
    {
        std::istringstream ss(line.substr(2));
        std::string field;
        while (ss >> field) {
            auto eq = field.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = field.substr(0, eq);
            const std::string val = field.substr(eq + 1);
            if (key == "kind") kind_s = val;
            else if (key == "folds") folds = std::stoi(val);
            else if (key == "seed") seed = std::stoull(val);
            else if (key == "L") L = std::stoi(val);
            else if (key == "lmax") Lmax = std::stoi(val);
            else if (key == "cmax") Cmax = std::stoi(val);
        }
    }
    ScoreTable table(L, Lmax, Cmax, score_kind_from_string(kind_s), seed, folds);

    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int s = 0, l = 0, c = 0;
        std::string kind_field;
        double value = 0.0;
        if (!(ss >> s >> l >> c >> kind_field >> value))
            throw std::runtime_error("score table: malformed line " +
                                     std::to_string(lineno));
        table.set_scored(s - 1, l, c, value);
    }
    return table;
}

ScoreTable build_score_table_with(const CandidateScorer& scorer, int L, int Lmax,
                                  int Cmax, ScoreKind kind, uint64_t seed,
                                  int cv_folds, const PruneConfig& prune, int jobs,
                                  std::vector<PruneLogEntry>* prune_log,
                                  const ScoreTable* resume,
                                  const BuildProgress& progress) {
    ScoreTable table(L, Lmax, Cmax, kind, seed, cv_folds);
    std::vector<std::vector<PruneLogEntry>> logs(L);
    std::atomic<int> starts_done{0};
    std::mutex progress_mutex;

    auto score_candidate = [&](int s, int l, int c) {
        if (resume && resume->is_candidate(s, l, c) &&
            resume->state(s, l, c) == CellState::Scored)
            return resume->value(s, l, c);
        return scorer(s, l, c);
    };

    parallel_for(L, jobs, [&](int s) {
        const int max_len = std::min(Lmax, L - s);
        table.set_scored(s, 1, 1, score_candidate(s, 1, 1));

        std::vector<double> ext_runmax(Cmax + 1, kNegInf);
        std::vector<bool> ext_stopped(Cmax + 1, false);
        for (int l = 2; l <= max_len; ++l) {
            double card_runmax = kNegInf;
            bool card_stopped = false;
            for (int c = 2; c <= Cmax; ++c) {
                if (prune.enabled && ext_stopped[c]) {
                    table.set_skipped(s, l, c);
                    logs[s].push_back({s, l, c, PruneLogEntry::Reason::ExtensionDrop});
                    continue;
                }
                if (prune.enabled && card_stopped) {
                    table.set_skipped(s, l, c);
                    logs[s].push_back({s, l, c, PruneLogEntry::Reason::CardinalityStop});
                    continue;
                }
                const double v = score_candidate(s, l, c);
                if (prune.enabled && v < card_runmax - prune.slack) {
                    table.set_skipped(s, l, c);
                    logs[s].push_back({s, l, c, PruneLogEntry::Reason::CardinalityDrop});
                    card_stopped = true;
                } else {
                    table.set_scored(s, l, c, v);
                    card_runmax = std::max(card_runmax, v);
                }
                if (prune.enabled) {
                    if (v < ext_runmax[c] - prune.slack)
                        ext_stopped[c] = true;
                    else
                        ext_runmax[c] = std::max(ext_runmax[c], v);
                }
            }
        }
        if (progress) {
            const int done = starts_done.fetch_add(1) + 1;
            std::lock_guard<std::mutex> lock(progress_mutex);
            progress(done, L);
        }
    });

    if (prune_log)
        for (auto& per_start : logs)
            prune_log->insert(prune_log->end(), per_start.begin(), per_start.end());
    return table;
}

ScoreTable build_score_table(const AlignedDataset& ds, std::span<const int> rows,
                             ScoreKind kind, int Cmax, int Lmax,
                             const ScoreConfig& cfg, const PruneConfig& prune,
                             int jobs, std::vector<PruneLogEntry>* prune_log,
                             const ScoreTable* resume, const BuildProgress& progress) {
    if (Lmax > ds.n_cols) Lmax = ds.n_cols;
    auto scorer = [&, rows](int s, int l, int c) {
        return seg_score(ds, rows, Span{s, l}, c, kind, cfg).value;
    };
    return build_score_table_with(scorer, ds.n_cols, Lmax, Cmax, kind, cfg.seed,
                                  kind == ScoreKind::CV ? cfg.cv_folds : 0, prune,
                                  jobs, prune_log, resume, progress);
}

ScoreTable build_score_table(const AlignedDataset& ds, ScoreKind kind, int Cmax,
                             int Lmax, const ScoreConfig& cfg,
                             const PruneConfig& prune, int jobs) {
    std::vector<int> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return build_score_table(ds, rows, kind, Cmax, Lmax, cfg, prune, jobs);
}

std::pair<Segmentation, double> optimal_segmentation(const ScoreTable& table) {
    const int L = table.L();
    std::vector<double> best_prefix(L + 1, kNegInf);
    std::vector<std::pair<int, int>> back(L + 1, {0, 0});  // (len, states)
    best_prefix[0] = 0.0;

    for (int i = 1; i <= L; ++i) {
        for (int l = 1; l <= std::min(i, table.Lmax()); ++l) {
            const int s = i - l;
            const int c_lo = l == 1 ? 1 : 2;
            const int c_hi = l == 1 ? 1 : table.Cmax();
            for (int c = c_lo; c <= c_hi; ++c) {
                if (table.state(s, l, c) == CellState::Skipped) continue;
                const double total = best_prefix[i - l] + table.value(s, l, c);
                if (total > best_prefix[i]) {
                    best_prefix[i] = total;
                    back[i] = {l, c};
                }
            }
        }
        if (!std::isfinite(best_prefix[i]))
            throw std::runtime_error("no candidate available ending at position " +
                                     std::to_string(i));
    }

    Segmentation seg;
    double check = 0.0;
    for (int i = L; i > 0;) {
        auto [l, c] = back[i];
        seg.segments.push_back({i - l, l, c});
        check += table.value(i - l, l, c);
        i -= l;
    }
    std::reverse(seg.segments.begin(), seg.segments.end());
    seg.validate(L);
    if (std::fabs(check - best_prefix[L]) > 1e-9)
        throw std::runtime_error("traceback score mismatch: " + std::to_string(check) +
                                 " vs " + std::to_string(best_prefix[L]));
    return {std::move(seg), best_prefix[L]};
}

std::pair<Segmentation, double> greedy_segmentation(const ScoreTable& table) {
    const int L = table.L();
    struct Cand {
        double norm;
        int s, l, c;
        double value;
    };
    std::vector<Cand> cands;
    for (int s = 0; s < L; ++s)
        for (int l = 1; l <= std::min(table.Lmax(), L - s); ++l) {
            const int c_lo = l == 1 ? 1 : 2;
            const int c_hi = l == 1 ? 1 : table.Cmax();
            for (int c = c_lo; c <= c_hi; ++c) {
                if (table.state(s, l, c) != CellState::Scored) continue;
                const double v = table.value(s, l, c);
                cands.push_back({v / l, s, l, c, v});
            }
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.norm != b.norm) return a.norm > b.norm;
        if (a.s != b.s) return a.s < b.s;
        if (a.l != b.l) return a.l < b.l;
        return a.c < b.c;
    });

    std::vector<bool> covered(L, false);
    int n_covered = 0;
    Segmentation seg;
    double total = 0.0;
    for (const Cand& cand : cands) {
        if (n_covered == L) break;
        bool overlaps = false;
        for (int p = cand.s; p < cand.s + cand.l; ++p)
            if (covered[p]) {
                overlaps = true;
                break;
            }
        if (overlaps) continue;
        for (int p = cand.s; p < cand.s + cand.l; ++p) covered[p] = true;
        n_covered += cand.l;
        seg.segments.push_back({cand.s, cand.l, cand.c});
        total += cand.value;
    }
    if (n_covered != L)
        throw std::runtime_error("greedy could not tile all positions");

    std::sort(seg.segments.begin(), seg.segments.end(),
              [](const Segment& a, const Segment& b) { return a.start < b.start; });
    seg.validate(L);
    return {std::move(seg), total};
}

}  // namespace segmix
