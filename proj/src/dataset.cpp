#include "segmix/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "segmix/rng.hpp"

namespace segmix {

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2)
        throw std::invalid_argument("alphabet needs at least 2 symbols, got " +
                                    std::to_string(symbols_.size()));
    for (size_t i = 0; i < symbols_.size(); ++i) {
        if (symbols_[i].empty())
            throw std::invalid_argument("alphabet symbols must be non-empty");
        if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
            throw std::invalid_argument("duplicate alphabet symbol '" + symbols_[i] + "'");
    }
}

int Alphabet::index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

long long AlignedDataset::observed_count() const {
    long long n = 0;
    for (int16_t e : entries) n += (e != kMissing);
    return n;
}

int AlignedDataset::column_observed_count(int col) const {
    int n = 0;
    for (int r = 0; r < n_rows; ++r) n += (at(r, col) != kMissing);
    return n;
}

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> tokenize(const std::string& line,
                                  const std::optional<char>& delimiter) {
    std::vector<std::string> tokens;
    if (!delimiter) {
        tokens.reserve(line.size());
        for (char ch : line) tokens.emplace_back(1, ch);
        return tokens;
    }
    std::string current;
    for (char ch : line) {
        if (ch == *delimiter) {
            tokens.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    tokens.push_back(current);
    return tokens;
}

struct RawRows {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> labels;
};

RawRows read_matrix(std::istream& in, const ParseOptions& opts) {
    RawRows raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        raw.rows.push_back(tokenize(line, opts.delimiter));
        raw.labels.push_back("seq" + std::to_string(raw.rows.size()));
    }
    return raw;
}

RawRows read_fasta(std::istream& in, const ParseOptions& opts) {
    RawRows raw;
    std::string line;
    bool in_record = false;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        if (line[0] == '>') {
            raw.rows.emplace_back();
            raw.labels.push_back(line.substr(1));
            in_record = true;
            continue;
        }
        if (!in_record)
            throw std::runtime_error("fasta parse error: sequence data before first '>' header");
        auto tokens = tokenize(line, opts.delimiter);
        auto& row = raw.rows.back();
        row.insert(row.end(), tokens.begin(), tokens.end());
    }
    return raw;
}

}  // namespace

AlignedDataset parse_alignment(std::istream& in, TextFormat format,
                               const ParseOptions& opts) {
    RawRows raw = format == TextFormat::Matrix ? read_matrix(in, opts)
                                               : read_fasta(in, opts);
    if (raw.rows.empty()) throw std::runtime_error("empty input: no sequences found");

    const size_t n_cols = raw.rows.front().size();
    if (n_cols == 0) throw std::runtime_error("parse error: row 1 has no symbols");
    for (size_t r = 0; r < raw.rows.size(); ++r) {
        if (raw.rows[r].size() != n_cols)
            throw std::runtime_error("ragged input: row " + std::to_string(r + 1) +
                                     " has " + std::to_string(raw.rows[r].size()) +
                                     " entries, expected " + std::to_string(n_cols));
    }

    Alphabet alphabet;
    if (opts.alphabet) {
        if (opts.alphabet->index(opts.missing_token) >= 0)
            throw std::runtime_error("missing token '" + opts.missing_token +
                                     "' collides with an alphabet symbol");
        alphabet = *opts.alphabet;
    } else {
        std::set<std::string> seen;
        for (const auto& row : raw.rows)
            for (const auto& tok : row)
                if (tok != opts.missing_token) seen.insert(tok);
        alphabet = Alphabet(std::vector<std::string>(seen.begin(), seen.end()));
    }

    AlignedDataset ds;
    ds.alphabet = alphabet;
    ds.missing_token = opts.missing_token;
    ds.n_rows = static_cast<int>(raw.rows.size());
    ds.n_cols = static_cast<int>(n_cols);
    ds.entries.resize(static_cast<size_t>(ds.n_rows) * ds.n_cols);
    ds.row_labels = std::move(raw.labels);

    for (int r = 0; r < ds.n_rows; ++r) {
        for (int c = 0; c < ds.n_cols; ++c) {
            const std::string& tok = raw.rows[r][c];
            if (tok == opts.missing_token) {
                ds.entries[static_cast<size_t>(r) * ds.n_cols + c] = kMissing;
                continue;
            }
            int idx = alphabet.index(tok);
            if (idx < 0)
                throw std::runtime_error("unknown symbol '" + tok + "' at row " +
                                         std::to_string(r + 1) + ", position " +
                                         std::to_string(c + 1));
            ds.entries[static_cast<size_t>(r) * ds.n_cols + c] = static_cast<int16_t>(idx);
        }
    }
    return ds;
}

AlignedDataset parse_alignment_file(const std::string& path, TextFormat format,
                                    const ParseOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    return parse_alignment(in, format, opts);
}

void serialize_alignment(const AlignedDataset& ds, std::ostream& out,
                         TextFormat format) {
    bool multi_char = false;
    for (const auto& s : ds.alphabet.symbols()) multi_char |= s.size() > 1;
    multi_char |= ds.missing_token.size() > 1;

    auto write_row = [&](int r) {
        for (int c = 0; c < ds.n_cols; ++c) {
            if (multi_char && c > 0) out << ' ';
            int16_t e = ds.at(r, c);
            out << (e == kMissing ? ds.missing_token : ds.alphabet.symbol(e));
        }
        out << '\n';
    };

    for (int r = 0; r < ds.n_rows; ++r) {
        if (format == TextFormat::Fasta)
            out << '>' << (ds.row_labels.empty() ? "seq" + std::to_string(r + 1)
                                                 : ds.row_labels[r])
                << '\n';
        write_row(r);
    }
}

AlignedDataset subset_rows(const AlignedDataset& ds, std::span<const int> rows) {
    AlignedDataset out;
    out.alphabet = ds.alphabet;
    out.missing_token = ds.missing_token;
    out.n_rows = static_cast<int>(rows.size());
    out.n_cols = ds.n_cols;
    out.entries.reserve(static_cast<size_t>(out.n_rows) * out.n_cols);
    for (int r : rows) {
        if (r < 0 || r >= ds.n_rows)
            throw std::out_of_range("subset_rows: row index " + std::to_string(r));
        auto span = ds.row(r);
        out.entries.insert(out.entries.end(), span.begin(), span.end());
        if (!ds.row_labels.empty()) out.row_labels.push_back(ds.row_labels[r]);
    }
    return out;
}

void MaskRecord::write_tsv(std::ostream& out, const Alphabet& alphabet) const {
    out << "row\tcol\toriginal\n";
    for (const auto& cell : cells)
        out << (cell.row + 1) << '\t' << (cell.col + 1) << '\t'
            << alphabet.symbol(cell.original) << '\n';
}

MaskRecord MaskRecord::read_tsv(std::istream& in, const Alphabet& alphabet) {
    MaskRecord record;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("row\t", 0) == 0) continue;
        }
        std::istringstream ss(line);
        std::string row_s, col_s, tok;
        if (!std::getline(ss, row_s, '\t') || !std::getline(ss, col_s, '\t') ||
            !std::getline(ss, tok, '\t'))
            throw std::runtime_error("malformed mask record line: " + line);
        int idx = alphabet.index(tok);
        if (idx < 0) throw std::runtime_error("mask record symbol '" + tok +
                                              "' not in alphabet");
        record.cells.push_back({std::stoi(row_s) - 1, std::stoi(col_s) - 1,
                                static_cast<int16_t>(idx)});
    }
    return record;
}

std::pair<AlignedDataset, MaskRecord> mask_entries(const AlignedDataset& ds,
                                                   double rate, uint64_t seed) {
    if (rate < 0.0 || rate > 1.0)
        throw std::invalid_argument("mask rate must be in [0,1]");

    std::vector<std::pair<int, int>> observed;
    observed.reserve(static_cast<size_t>(ds.observed_count()));
    for (int r = 0; r < ds.n_rows; ++r)
        for (int c = 0; c < ds.n_cols; ++c)
            if (ds.at(r, c) != kMissing) observed.emplace_back(r, c);

    const auto target = static_cast<size_t>(
        std::llround(rate * static_cast<double>(observed.size())));

    Rng rng(derive_seed({seed, stream::kMask}));
    MaskRecord record;
    record.cells.reserve(target);
    AlignedDataset masked = ds;
    // Partial Fisher-Yates over the observed-cell list.
    for (size_t i = 0; i < target; ++i) {
        size_t j = i + rng.next_below(observed.size() - i);
        std::swap(observed[i], observed[j]);
        auto [r, c] = observed[i];
        record.cells.push_back({r, c, ds.at(r, c)});
        masked.entries[static_cast<size_t>(r) * ds.n_cols + c] = kMissing;
    }
    std::sort(record.cells.begin(), record.cells.end(),
              [](const MaskedCell& a, const MaskedCell& b) {
                  return std::pair(a.row, a.col) < std::pair(b.row, b.col);
              });
    return {std::move(masked), std::move(record)};
}

AlignedDataset unmask(const AlignedDataset& ds, const MaskRecord& record) {
    AlignedDataset out = ds;
    for (const auto& cell : record.cells) {
        auto& slot = out.entries[static_cast<size_t>(cell.row) * ds.n_cols + cell.col];
        if (slot != kMissing)
            throw std::runtime_error("unmask: cell (" + std::to_string(cell.row + 1) +
                                     "," + std::to_string(cell.col + 1) +
                                     ") is not missing");
        slot = cell.original;
    }
    return out;
}

namespace {

int16_t majority_of(const std::vector<long long>& counts, long long total,
                    const char* what) {
    if (total == 0)
        throw std::runtime_error(std::string(what) + ": no observed entries");
    int best = 0;
    for (int v = 1; v < static_cast<int>(counts.size()); ++v)
        if (counts[v] > counts[best]) best = v;
    return static_cast<int16_t>(best);
}

}  // namespace

int16_t column_majority(const AlignedDataset& ds, int col) {
    std::vector<long long> counts(ds.alphabet.size(), 0);
    long long total = 0;
    for (int r = 0; r < ds.n_rows; ++r) {
        int16_t e = ds.at(r, col);
        if (e == kMissing) continue;
        ++counts[e];
        ++total;
    }
    return majority_of(counts, total,
                       ("column_majority at position " + std::to_string(col + 1)).c_str());
}

int16_t global_majority(const AlignedDataset& ds) {
    std::vector<long long> counts(ds.alphabet.size(), 0);
    long long total = 0;
    for (int16_t e : ds.entries) {
        if (e == kMissing) continue;
        ++counts[e];
        ++total;
    }
    return majority_of(counts, total, "global_majority");
}

}  // namespace segmix
