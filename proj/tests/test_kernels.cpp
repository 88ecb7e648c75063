#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "segmix/kernels.hpp"
#include "segmix/mixture.hpp"
#include "segmix/rng.hpp"
#include "test_util.hpp"

using namespace segmix;

namespace {

struct KernelCase {
    std::vector<int16_t> symbols;
    std::vector<double> weights, emissions, resp;
    int n_rows, len, A, c;

    kern::SpanView view() const { return {symbols.data(), n_rows, len, A}; }
};

KernelCase random_case(uint64_t seed, int n_rows, int len, int A, int c) {
    KernelCase k;
    k.n_rows = n_rows;
    k.len = len;
    k.A = A;
    k.c = c;
    Rng rng(seed);
    const int cpad = kern::padded_states(c);
    k.symbols.resize(static_cast<size_t>(n_rows) * len);
    for (auto& s : k.symbols) {
        s = rng.next_double() < 0.2 ? kMissing
                                    : static_cast<int16_t>(rng.next_below(A));
    }
    k.weights.assign(cpad, 0.0);
    for (int i = 0; i < c; ++i) k.weights[i] = 0.05 + rng.next_double();
    k.emissions.assign(static_cast<size_t>(len) * A * cpad, 0.0);
    for (int i = 0; i < len * A; ++i)
        for (int j = 0; j < c; ++j)
            k.emissions[static_cast<size_t>(i) * cpad + j] = 0.01 + rng.next_double();
    k.resp.assign(static_cast<size_t>(n_rows) * cpad, 0.0);
    for (int r = 0; r < n_rows; ++r)
        for (int j = 0; j < c; ++j)
            k.resp[static_cast<size_t>(r) * cpad + j] = rng.next_double();
    return k;
}

}  // namespace

TEST_CASE("padded state counts are multiples of the lane width") {
    CHECK(kern::padded_states(1) == 4);
    CHECK(kern::padded_states(4) == 4);
    CHECK(kern::padded_states(5) == 8);
    CHECK(kern::padded_states(10) == 12);
}

TEST_CASE("avx2 kernels match scalar bitwise") {
    if (!kern::avx2_available()) {
        MESSAGE("avx2 not available; skipping");
        return;
    }
#ifdef SEGMIX_HAVE_AVX2
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng dims(seed * 977);
        const int n_rows = 1 + static_cast<int>(dims.next_below(40));
        const int len = 1 + static_cast<int>(dims.next_below(30));
        const int A = 2 + static_cast<int>(dims.next_below(20));
        const int c = 1 + static_cast<int>(dims.next_below(10));
        KernelCase k = random_case(seed, n_rows, len, A, c);
        const int cpad = kern::padded_states(c);

        std::vector<double> out_s(static_cast<size_t>(n_rows) * cpad, -1.0);
        std::vector<double> out_v(out_s);
        kern::scalar::estep_products(k.view(), k.weights.data(), k.emissions.data(),
                                     k.c, out_s.data());
        kern::avx2::estep_products(k.view(), k.weights.data(), k.emissions.data(),
                                   k.c, out_v.data());
        CHECK(std::memcmp(out_s.data(), out_v.data(),
                          out_s.size() * sizeof(double)) == 0);

        std::vector<double> cnt_s(static_cast<size_t>(len) * A * cpad, 0.0);
        std::vector<double> cnt_v(cnt_s);
        std::vector<double> sums_s(cpad, 0.0), sums_v(cpad, 0.0);
        kern::scalar::mstep_accumulate(k.view(), k.resp.data(), k.c, cnt_s.data(),
                                       sums_s.data());
        kern::avx2::mstep_accumulate(k.view(), k.resp.data(), k.c, cnt_v.data(),
                                     sums_v.data());
        CHECK(std::memcmp(cnt_s.data(), cnt_v.data(),
                          cnt_s.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(sums_s.data(), sums_v.data(),
                          sums_s.size() * sizeof(double)) == 0);
    }
#endif
}

TEST_CASE("backend selection is sticky and honors availability") {
    const kern::Backend original = kern::active_backend();
    kern::set_backend(kern::Backend::Scalar);
    CHECK(kern::active_backend() == kern::Backend::Scalar);
    kern::set_backend(kern::Backend::Avx2);
    if (kern::avx2_available())
        CHECK(kern::active_backend() == kern::Backend::Avx2);
    else
        CHECK(kern::active_backend() == kern::Backend::Scalar);
    kern::set_backend(original);
}

TEST_CASE("whole EM fits are bitwise identical across backends") {
    if (!kern::avx2_available()) {
        MESSAGE("avx2 not available; skipping");
        return;
    }
    const auto ds =
        test::make_dataset({"ABAB", "ABAB", "AB?B", "BABA", "BABA", "B?BA"});
    EmConfig cfg;
    cfg.seed = 9;
    const DirichletPrior prior = DirichletPrior::default_for(2);

    const kern::Backend original = kern::active_backend();
    kern::set_backend(kern::Backend::Scalar);
    const FittedMixture scalar_fit = fit_em(ds, Span{0, 4}, 2, prior, cfg);
    kern::set_backend(kern::Backend::Avx2);
    const FittedMixture avx2_fit = fit_em(ds, Span{0, 4}, 2, prior, cfg);
    kern::set_backend(original);

    REQUIRE(scalar_fit.weights.size() == avx2_fit.weights.size());
    CHECK(std::memcmp(scalar_fit.weights.data(), avx2_fit.weights.data(),
                      scalar_fit.weights.size() * sizeof(double)) == 0);
    REQUIRE(scalar_fit.emissions.size() == avx2_fit.emissions.size());
    CHECK(std::memcmp(scalar_fit.emissions.data(), avx2_fit.emissions.data(),
                      scalar_fit.emissions.size() * sizeof(double)) == 0);
    CHECK(scalar_fit.train_loglik == avx2_fit.train_loglik);
    CHECK(scalar_fit.objective_value == avx2_fit.objective_value);
}
