#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "segmix/scores.hpp"

namespace segmix {

// One tile of a segmentation. start is 0-based internally; serialized forms
// are 1-based. states is 1 for length-1 segments (no hidden variable).
struct Segment {
    int start = 0;
    int len = 1;
    int states = 1;
    int end() const { return start + len - 1; }
    Span span() const { return {start, len}; }
    bool correlated() const { return len >= 2 && states >= 2; }
};

// Complete, non-overlapping tiling of positions 0..L-1.
struct Segmentation {
    std::vector<Segment> segments;

    int length() const;
    // Throws unless the segments tile 0..L-1 in order without gaps.
    void validate(int L) const;
    // Internal boundary end positions (0-based, excludes the last segment).
    std::vector<int> internal_boundaries() const;
};

enum class CellState : uint8_t { Absent = 0, Scored = 1, Skipped = 2 };

// Dense (start, length, cardinality) -> score map over the candidate domain
// 1 <= l <= Lmax (l capped by the sequence end), c = 1 for l = 1 and
// 2..Cmax otherwise.
class ScoreTable {
public:
    ScoreTable() = default;
    ScoreTable(int L, int Lmax, int Cmax, ScoreKind kind, uint64_t seed,
               int cv_folds);

    int L() const { return L_; }
    int Lmax() const { return Lmax_; }
    int Cmax() const { return Cmax_; }
    ScoreKind kind() const { return kind_; }
    uint64_t seed() const { return seed_; }
    int cv_folds() const { return cv_folds_; }

    bool is_candidate(int s, int l, int c) const;
    CellState state(int s, int l, int c) const;
    double value(int s, int l, int c) const;
    void set_scored(int s, int l, int c, double value);
    void set_skipped(int s, int l, int c);

    long long scored_count() const;
    long long candidate_count() const;

    void write_tsv(std::ostream& out) const;
    static ScoreTable read_tsv(std::istream& in);

private:
    size_t index(int s, int l, int c) const;
    void require_candidate(int s, int l, int c) const;

    int L_ = 0, Lmax_ = 0, Cmax_ = 0;
    ScoreKind kind_ = ScoreKind::CV;
    uint64_t seed_ = 0;
    int cv_folds_ = 0;
    std::vector<double> values_;
    std::vector<CellState> states_;
};

struct PruneConfig {
    bool enabled = false;
    double slack = std::numeric_limits<double>::infinity();
};

struct PruneLogEntry {
    enum class Reason {
        CardinalityDrop,   // fell more than slack below the same-(s,l) best
        CardinalityStop,   // after a cardinality drop at this (s,l)
        ExtensionDrop,     // fell more than slack below the same-(s,c) best
    };
    int s = 0, l = 0, c = 0;  // 0-based s
    Reason reason = Reason::CardinalityDrop;
};

using CandidateScorer = std::function<double(int s, int l, int c)>;
using BuildProgress = std::function<void(int starts_done, int starts_total)>;

// Core table builder over an injected scorer (serial per start, parallel
// across starts). Prune rule (a): scanning c ascending at fixed (s,l), a
// score more than slack below the running maximum is skipped (it is dominated
// by the best same-(s,l) candidate) and higher c are not scored. Rule (b):
// at fixed (s,c), a score more than slack below the running maximum over
// shorter lengths stops the extension; longer candidates are skipped.
// Length-1 candidates are never pruned.
ScoreTable build_score_table_with(const CandidateScorer& scorer, int L, int Lmax,
                                  int Cmax, ScoreKind kind, uint64_t seed,
                                  int cv_folds, const PruneConfig& prune,
                                  int jobs,
                                  std::vector<PruneLogEntry>* prune_log = nullptr,
                                  const ScoreTable* resume = nullptr,
                                  const BuildProgress& progress = {});

ScoreTable build_score_table(const AlignedDataset& ds, std::span<const int> rows,
                             ScoreKind kind, int Cmax, int Lmax,
                             const ScoreConfig& cfg, const PruneConfig& prune = {},
                             int jobs = 1,
                             std::vector<PruneLogEntry>* prune_log = nullptr,
                             const ScoreTable* resume = nullptr,
                             const BuildProgress& progress = {});
ScoreTable build_score_table(const AlignedDataset& ds, ScoreKind kind, int Cmax,
                             int Lmax, const ScoreConfig& cfg,
                             const PruneConfig& prune = {}, int jobs = 1);

// Maximum-score complete non-overlapping segmentation by dynamic programming
// over prefix scores; ties prefer the shorter final segment, then the smaller
// cardinality. Throws on absent (never scored, not skipped) candidates.
std::pair<Segmentation, double> optimal_segmentation(const ScoreTable& table);

// Comparator: repeatedly commits the non-overlapping candidate with the
// highest length-normalized score (ties: earlier start, shorter, smaller c).
std::pair<Segmentation, double> greedy_segmentation(const ScoreTable& table);

}  // namespace segmix
