#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "segmix/dataset.hpp"
#include "segmix/rng.hpp"
#include "test_util.hpp"

using namespace segmix;

TEST_CASE("matrix parse of a 2x2 example with one missing cell") {
    std::istringstream in("AB\nA?\n");
    const AlignedDataset ds = parse_alignment(in, TextFormat::Matrix);
    CHECK(ds.n_rows == 2);
    CHECK(ds.n_cols == 2);
    REQUIRE(ds.alphabet.size() == 2);
    CHECK(ds.alphabet.symbol(0) == "A");
    CHECK(ds.alphabet.symbol(1) == "B");
    CHECK(ds.at(1, 1) == kMissing);
    CHECK(ds.missing_count() == 1);
    CHECK(ds.observed_count() == 3);
}

TEST_CASE("snp-shaped input: 20 x 260 over {1,2} with 683 missing entries") {
    // Shaped like the chromosome-21 stretch: binary alphabet, 'N' for missing.
    const int N = 20, L = 260, target_missing = 683;
    Rng rng(404);
    std::vector<std::string> rows(N, std::string(L, '1'));
    for (auto& row : rows)
        for (auto& ch : row) ch = rng.next_below(2) ? '2' : '1';
    int placed = 0;
    while (placed < target_missing) {
        const int r = static_cast<int>(rng.next_below(N));
        const int c = static_cast<int>(rng.next_below(L));
        if (rows[r][c] == 'N') continue;
        rows[r][c] = 'N';
        ++placed;
    }
    std::ostringstream text;
    for (const auto& row : rows) text << row << '\n';
    std::istringstream in(text.str());
    ParseOptions opts;
    opts.missing_token = "N";
    const AlignedDataset ds = parse_alignment(in, TextFormat::Matrix, opts);
    CHECK(ds.n_rows == 20);
    CHECK(ds.n_cols == 260);
    CHECK(ds.alphabet.size() == 2);
    CHECK(ds.missing_count() == 683);
}

TEST_CASE("vaccine-shaped input: 106 x 2859 over 21 symbols, ~23% observed") {
    const int N = 106, L = 2859;
    const std::string symbols = "ACDEFGHIKLMNPQRSTVWY-";
    REQUIRE(symbols.size() == 21);
    Rng rng(808);
    std::ostringstream text;
    long long observed = 0;
    for (int r = 0; r < N; ++r) {
        std::string row(L, '?');
        for (int c = 0; c < L; ++c)
            if (rng.next_double() < 0.23) {
                row[c] = symbols[rng.next_below(symbols.size())];
                ++observed;
            }
        text << row << '\n';
    }
    std::istringstream in(text.str());
    const AlignedDataset ds = parse_alignment(in, TextFormat::Matrix);
    CHECK(ds.n_rows == 106);
    CHECK(ds.n_cols == 2859);
    CHECK(ds.alphabet.size() == 21);
    CHECK(ds.observed_count() == observed);
    const double frac = static_cast<double>(observed) / (1.0 * N * L);
    CHECK(frac == doctest::Approx(0.23).epsilon(0.05));
}

TEST_CASE("parse errors carry context") {
    SUBCASE("ragged rows name the offending row") {
        std::istringstream in("AB\nABB\n");
        CHECK_THROWS_WITH_AS(parse_alignment(in, TextFormat::Matrix),
                             doctest::Contains("row 2"), std::runtime_error);
    }
    SUBCASE("empty input") {
        std::istringstream in("");
        CHECK_THROWS_AS(parse_alignment(in, TextFormat::Matrix), std::runtime_error);
    }
    SUBCASE("missing token colliding with an explicit alphabet symbol") {
        std::istringstream in("AB\n");
        ParseOptions opts;
        opts.missing_token = "B";
        opts.alphabet = Alphabet({"A", "B"});
        CHECK_THROWS_WITH_AS(parse_alignment(in, TextFormat::Matrix, opts),
                             doctest::Contains("collides"), std::runtime_error);
    }
    SUBCASE("symbol outside an explicit alphabet") {
        std::istringstream in("AC\n");
        ParseOptions opts;
        opts.alphabet = Alphabet({"A", "B"});
        CHECK_THROWS_WITH_AS(parse_alignment(in, TextFormat::Matrix, opts),
                             doctest::Contains("'C'"), std::runtime_error);
    }
    SUBCASE("single-symbol inferred alphabet is rejected") {
        std::istringstream in("AA\nAA\n");
        CHECK_THROWS_AS(parse_alignment(in, TextFormat::Matrix), std::invalid_argument);
    }
}

TEST_CASE("fasta records parse with wrapped lines and labels") {
    std::istringstream in(">first\nAB\nAB\n>second\nBB?A\n");
    const AlignedDataset ds = parse_alignment(in, TextFormat::Fasta);
    CHECK(ds.n_rows == 2);
    CHECK(ds.n_cols == 4);
    CHECK(ds.row_labels[0] == "first");
    CHECK(ds.row_labels[1] == "second");
    CHECK(ds.at(1, 2) == kMissing);
}

TEST_CASE("parse-serialize-parse round trip preserves the matrix") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int N = 1 + static_cast<int>(rng.next_below(8));
        const int L = 1 + static_cast<int>(rng.next_below(12));
        std::vector<std::string> rows(N);
        for (auto& row : rows) {
            row.resize(L);
            for (auto& ch : row) {
                const auto r = rng.next_below(4);
                ch = r == 3 ? '?' : static_cast<char>('A' + r);
            }
        }
        bool has_a = false, has_b = false;
        for (auto& row : rows)
            for (char ch : row) {
                has_a |= ch == 'A';
                has_b |= ch == 'B';
            }
        if (!has_a) rows[0][0] = 'A';
        if (!has_b) rows[N - 1][L - 1] = 'B';

        std::ostringstream text;
        for (const auto& row : rows) text << row << '\n';
        std::istringstream in(text.str());
        const AlignedDataset first = parse_alignment(in, TextFormat::Matrix);

        for (TextFormat format : {TextFormat::Matrix, TextFormat::Fasta}) {
            std::ostringstream out;
            serialize_alignment(first, out, format);
            std::istringstream back(out.str());
            ParseOptions opts;
            opts.alphabet = first.alphabet;
            const AlignedDataset second = parse_alignment(back, format, opts);
            CHECK(second.n_rows == first.n_rows);
            CHECK(second.n_cols == first.n_cols);
            CHECK(second.alphabet == first.alphabet);
            CHECK(second.entries == first.entries);
        }
    }
}

TEST_CASE("multi-character tokens round trip through the delimiter variant") {
    std::istringstream in("Ala Gly ??\nGly Ala Ala\n");
    ParseOptions opts;
    opts.missing_token = "??";
    opts.delimiter = ' ';
    const AlignedDataset ds = parse_alignment(in, TextFormat::Matrix, opts);
    CHECK(ds.n_rows == 2);
    CHECK(ds.n_cols == 3);
    CHECK(ds.alphabet.size() == 2);
    CHECK(ds.at(0, 2) == kMissing);

    std::ostringstream out;
    serialize_alignment(ds, out, TextFormat::Matrix);
    std::istringstream back(out.str());
    const AlignedDataset again = parse_alignment(back, TextFormat::Matrix, opts);
    CHECK(again.entries == ds.entries);
}

TEST_CASE("masking is deterministic, exact, and reversible") {
    const auto ds = test::make_dataset({"ABABABAB", "BABA?BAB", "AABB?BAA",
                                        "ABBBABBA", "BBAABABA"});
    const long long observed = ds.observed_count();

    SUBCASE("rate zero changes nothing") {
        auto [masked, record] = mask_entries(ds, 0.0, 7);
        CHECK(masked.entries == ds.entries);
        CHECK(record.cells.empty());
    }
    SUBCASE("same seed gives the same mask, different seed differs") {
        auto [m1, r1] = mask_entries(ds, 0.3, 7);
        auto [m2, r2] = mask_entries(ds, 0.3, 7);
        CHECK(m1.entries == m2.entries);
        REQUIRE(r1.cells.size() == r2.cells.size());
        for (size_t i = 0; i < r1.cells.size(); ++i) {
            CHECK(r1.cells[i].row == r2.cells[i].row);
            CHECK(r1.cells[i].col == r2.cells[i].col);
        }
        auto [m3, r3] = mask_entries(ds, 0.3, 8);
        CHECK(m3.entries != m1.entries);
    }
    SUBCASE("mask size equals round(rate x observed) and spares missing cells") {
        const double rate = 0.10;
        auto [masked, record] = mask_entries(ds, rate, 42);
        CHECK(static_cast<long long>(record.cells.size()) ==
              std::llround(rate * static_cast<double>(observed)));
        for (const auto& cell : record.cells) {
            CHECK(ds.at(cell.row, cell.col) != kMissing);
            CHECK(ds.at(cell.row, cell.col) == cell.original);
            CHECK(masked.at(cell.row, cell.col) == kMissing);
        }
        CHECK(masked.observed_count() ==
              observed - static_cast<long long>(record.cells.size()));
    }
    SUBCASE("unmask restores the source exactly") {
        auto [masked, record] = mask_entries(ds, 0.4, 3);
        const AlignedDataset restored = unmask(masked, record);
        CHECK(restored.entries == ds.entries);
    }
    SUBCASE("mask record round trips through tsv") {
        auto [masked, record] = mask_entries(ds, 0.25, 5);
        std::ostringstream out;
        record.write_tsv(out, ds.alphabet);
        std::istringstream in(out.str());
        const MaskRecord again = MaskRecord::read_tsv(in, ds.alphabet);
        REQUIRE(again.cells.size() == record.cells.size());
        for (size_t i = 0; i < record.cells.size(); ++i) {
            CHECK(again.cells[i].row == record.cells[i].row);
            CHECK(again.cells[i].col == record.cells[i].col);
            CHECK(again.cells[i].original == record.cells[i].original);
        }
    }
}

TEST_CASE("column majority with tie-break and error cases") {
    const auto ds = test::make_dataset({"AA?", "AB?", "BB?", "?A?"});
    CHECK(column_majority(ds, 0) == 0);  // A,A,B -> A
    CHECK(column_majority(ds, 1) == 0);  // A,B,B,A tie -> lowest index
    CHECK_THROWS_AS(column_majority(ds, 2), std::runtime_error);
    CHECK(global_majority(ds) == 0);
}

TEST_CASE("global minority fraction is measurable from counts") {
    // 73 majority / 27 minority observed symbols.
    std::vector<std::string> rows;
    std::string row;
    for (int i = 0; i < 100; ++i) row += i < 73 ? '2' : '1';
    rows.push_back(row);
    const auto ds = test::make_dataset(rows, "12");
    const int16_t major = global_majority(ds);
    CHECK(major == ds.alphabet.index("2"));
    long long minority = 0;
    for (int16_t e : ds.entries) minority += (e != kMissing && e != major);
    CHECK(static_cast<double>(minority) / ds.observed_count() ==
          doctest::Approx(0.27));
}

TEST_CASE("row subsets preserve alphabet and columns") {
    const auto ds = test::make_dataset({"AB", "BA", "AA", "BB"});
    const std::vector<int> rows{2, 0};
    const AlignedDataset sub = subset_rows(ds, rows);
    CHECK(sub.n_rows == 2);
    CHECK(sub.n_cols == 2);
    CHECK(sub.at(0, 0) == ds.at(2, 0));
    CHECK(sub.at(1, 1) == ds.at(0, 1));
    CHECK_THROWS_AS(subset_rows(ds, std::vector<int>{4}), std::out_of_range);
}
