#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace segmix {

inline constexpr int16_t kMissing = -1;

// Ordered set of distinct symbol tokens. Index order is fixed at
// construction; all tie-breaking rules refer to this order.
class Alphabet {
public:
    Alphabet() = default;
    explicit Alphabet(std::vector<std::string> symbols);

    int size() const { return static_cast<int>(symbols_.size()); }
    const std::string& symbol(int i) const { return symbols_.at(i); }
    const std::vector<std::string>& symbols() const { return symbols_; }
    // -1 if the token is not a member.
    int index(const std::string& token) const;

    bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> index_;
};

// N aligned rows of L symbol indices; kMissing marks unobserved cells.
// Immutable after construction: operations that "modify" return copies.
struct AlignedDataset {
    Alphabet alphabet;
    std::string missing_token = "?";
    int n_rows = 0;
    int n_cols = 0;
    std::vector<int16_t> entries;         // n_rows * n_cols, row-major
    std::vector<std::string> row_labels;  // optional; empty or size n_rows

    int16_t at(int row, int col) const {
        return entries[static_cast<size_t>(row) * n_cols + col];
    }
    std::span<const int16_t> row(int r) const {
        return {entries.data() + static_cast<size_t>(r) * n_cols,
                static_cast<size_t>(n_cols)};
    }
    long long observed_count() const;
    int column_observed_count(int col) const;
    long long missing_count() const {
        return static_cast<long long>(n_rows) * n_cols - observed_count();
    }
};

enum class TextFormat { Matrix, Fasta };

struct ParseOptions {
    std::string missing_token = "?";
    // When set, tokens on each line are separated by this delimiter
    // (matrix format only); otherwise one character per position.
    std::optional<char> delimiter;
    // When set, fixes symbol indices; tokens outside it are an error.
    std::optional<Alphabet> alphabet;
};

AlignedDataset parse_alignment(std::istream& in, TextFormat format,
                               const ParseOptions& opts = {});
AlignedDataset parse_alignment_file(const std::string& path, TextFormat format,
                                    const ParseOptions& opts = {});

void serialize_alignment(const AlignedDataset& ds, std::ostream& out,
                         TextFormat format);

// Row subset preserving alphabet and column structure.
AlignedDataset subset_rows(const AlignedDataset& ds, std::span<const int> rows);

struct MaskedCell {
    int row = 0;
    int col = 0;
    int16_t original = kMissing;
};

struct MaskRecord {
    std::vector<MaskedCell> cells;

    void write_tsv(std::ostream& out, const Alphabet& alphabet) const;
    static MaskRecord read_tsv(std::istream& in, const Alphabet& alphabet);
};

// Hides round(rate * observed_count) observed cells, chosen uniformly without
// replacement; deterministic in the seed. Already-missing cells are never
// selected.
std::pair<AlignedDataset, MaskRecord> mask_entries(const AlignedDataset& ds,
                                                   double rate, uint64_t seed);

// Restores the cells recorded in the mask.
AlignedDataset unmask(const AlignedDataset& ds, const MaskRecord& record);

// Most frequent observed symbol in a column; ties go to the lowest alphabet
// index. Throws if the column has no observed entries.
int16_t column_majority(const AlignedDataset& ds, int col);
// Most frequent observed symbol over the whole matrix, same tie-break.
int16_t global_majority(const AlignedDataset& ds);

}  // namespace segmix
