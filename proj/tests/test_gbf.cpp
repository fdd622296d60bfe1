#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mtsfm/gbf.hpp"
#include "mtsfm/gbf_oracle.hpp"
#include "mtsfm/waveform.hpp"

using namespace mtsfm;

namespace {

// Ordinary Bessel J_m(x) from its power series.
double bessel_series(int m, double x) {
    const int n = std::abs(m);
    double term = std::pow(0.5 * x, n) / std::tgamma(n + 1.0);
    double sum = term;
    for (int i = 1; i < 200; ++i) {
        term *= -(0.25 * x * x) / (static_cast<double>(i) * static_cast<double>(i + n));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return (m < 0 && (n % 2)) ? -sum : sum;
}

// Periodic trapezoid of (1/2pi) int exp{j[phase - m theta]} on a dense grid,
// exact to rounding for band-limited integrands.
cplx trapezoid_coefficient(const GbfArgs& a, int m, int n = 8192) {
    cplx acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double th = -pi + two_pi * i / n;
        acc += std::polar(1.0, a.phase(th) - m * th);
    }
    return acc / static_cast<double>(n);
}

GbfArgs random_args(std::mt19937_64& rng, std::size_t K, bool mixed) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> al(K), be(K, 0.0);
    for (auto& v : al) v = u(rng);
    if (mixed)
        for (auto& v : be) v = u(rng);
    return GbfArgs::from(al, be);
}

}  // namespace

TEST(GbfTruncation, UnmodulatedCarrierNeedsOrderZero) {
    EXPECT_EQ(truncation_order(GbfArgs::from({0.0}, {0.0}), 1e-9), 0);
}

TEST(GbfTruncation, Table1NeedsAtLeastHundredOrders) {
    EXPECT_GE(truncation_order(presets::table1().gbf_args(), 1e-9), 100);
}

TEST(GbfTruncation, SingleToneMatchesBesselTailSearch) {
    // Smallest M with sum_{|m|<=M} J_m(1)^2 > 1 - 1e-9.
    int expected = 0;
    for (;; ++expected) {
        double s = 0.0;
        for (int m = -expected; m <= expected; ++m) s += std::pow(bessel_series(m, 1.0), 2);
        if (s > 1.0 - 1e-9) break;
    }
    EXPECT_EQ(truncation_order(GbfArgs::from({1.0}, {0.0}), 1e-9), expected);
}

TEST(GbfTruncation, CapExceededIsReported) {
    EXPECT_THROW(truncation_order(GbfArgs::from({50.0}, {0.0}), 1e-9, 16), Error);
    EXPECT_THROW(truncation_order(GbfArgs::from({1.0}, {0.0}), 0.0), Error);
}

TEST(GbfArgsValidation, RejectsInconsistentInput) {
    EXPECT_THROW(GbfArgs::from({1.0}, {1.0, 2.0}), Error);
    EXPECT_THROW(GbfArgs::from({}, {}), Error);
    EXPECT_THROW(GbfArgs::from({NAN}, {0.0}), Error);
    GbfArgs a{{1.0}, {0.5}, GbfKind::cylindrical};
    EXPECT_THROW(a.validate(), Error);
    GbfArgs b{{1.0}, {0.5}, GbfKind::modified};
    EXPECT_THROW(b.validate(), Error);
    EXPECT_EQ(GbfArgs::from({1.0}, {0.0}).kind, GbfKind::cylindrical);
    EXPECT_EQ(GbfArgs::from({0.0}, {1.0}).kind, GbfKind::modified);
    EXPECT_EQ(GbfArgs::from({1.0}, {1.0}).kind, GbfKind::mixed);
}

TEST(GbfCoefficientsTest, ZeroArgsGiveUnitCarrier) {
    const auto c = gbf_coefficients(GbfArgs::from({0.0}, {0.0}), 4);
    EXPECT_NEAR(std::abs(c[0] - 1.0), 0.0, 1e-15);
    for (int m = 1; m <= 4; ++m) {
        EXPECT_LT(std::abs(c[m]), 1e-15);
        EXPECT_LT(std::abs(c[-m]), 1e-15);
    }
}

TEST(GbfCoefficientsTest, FirstZeroOfJ0) {
    const auto c = gbf_coefficients(GbfArgs::from({2.40483}, {0.0}), 8);
    EXPECT_LT(std::abs(c[0]), 5e-6);
}

TEST(GbfCoefficientsTest, TwoToneCentreMatchesQuadrature) {
    const auto args = GbfArgs::from({1.0, 0.5}, {0.0, 0.0});
    const auto c = gbf_coefficients_tol(args, 1e-12);
    EXPECT_LT(std::abs(c[0] - gbf_oracle(args, 0)), 1e-10);
    EXPECT_LT(std::abs(c[0] - trapezoid_coefficient(args, 0)), 1e-10);
}

TEST(GbfCoefficientsTest, SingleToneReducesToOrdinaryBessel) {
    for (double x = 0.0; x <= 10.0; x += 0.5) {
        const auto c = gbf_coefficients(GbfArgs::from({x}, {0.0}), 60);
        for (int m = -20; m <= 20; ++m) {
            EXPECT_NEAR(c[m].real(), bessel_series(m, x), 1e-10) << "x=" << x << " m=" << m;
            EXPECT_NEAR(c[m].real(), std::cyl_bessel_j(static_cast<double>(std::abs(m)), x) * ((m < 0 && (m % 2)) ? -1.0 : 1.0),
                        1e-10);
            EXPECT_EQ(c[m].imag(), 0.0);
        }
    }
}

TEST(GbfCoefficientsTest, CylindricalSymmetryForSingleTone) {
    const auto c = gbf_coefficients(GbfArgs::from({3.7}, {0.0}), 40);
    for (int m = 1; m <= 20; ++m) EXPECT_NEAR(std::abs(c[-m] - ((m % 2) ? -1.0 : 1.0) * c[m]), 0.0, 1e-10);
}

TEST(GbfCoefficientsTest, CylindricalSymmetryForOddHarmonicSets) {
    // Only odd k present: phase(-theta) = -phase(theta) and phase(theta + pi) = -phase(theta).
    const auto c = gbf_coefficients(GbfArgs::from({1.3, 0.0, -0.7}, {0.0, 0.0, 0.0}), 60);
    for (int m = 1; m <= 20; ++m) EXPECT_NEAR(std::abs(c[-m] - ((m % 2) ? -1.0 : 1.0) * c[m]), 0.0, 1e-10);
}

TEST(GbfCoefficientsTest, FftMatchesQuadratureOracle) {
    std::mt19937_64 rng(11);
    for (std::size_t K = 1; K <= 3; ++K) {
        for (bool mixed : {false, true}) {
            const auto args = random_args(rng, K, mixed);
            const auto c = gbf_coefficients(args, std::max(20, truncation_order(args, 1e-14)));
            for (int m = -20; m <= 20; ++m) EXPECT_LT(std::abs(c[m] - gbf_oracle(args, m)), 1e-9) << "K=" << K << " m=" << m;
        }
    }
}

TEST(GbfCoefficientsTest, ParsevalWithinTolerance) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto args = random_args(rng, 1 + trial % 5, trial % 2 == 1);
        const auto c = gbf_coefficients_tol(args, 1e-9);
        EXPECT_LE(c.energy(), 1.0 + 1e-12);
        EXPECT_GE(c.residual_energy, -1e-12);
        EXPECT_LT(c.residual_energy, 1e-9);
    }
}

TEST(GbfCoefficientsTest, JacobiAngerReconstruction) {
    // The truncation error e(theta) satisfies mean |e|^2 = residual energy, so
    // the pointwise bound scales with sqrt(tol).
    const double tol = 1e-9;
    for (const auto& args : {presets::table1().gbf_args(), GbfArgs::from({1.0, 0.5}, {0.3, 0.0})}) {
        const auto c = gbf_coefficients_tol(args, tol);
        double max_err = 0.0, mean_sq = 0.0;
        const int n = 4096;
        for (int i = 0; i < n; ++i) {
            const double th = -pi + two_pi * i / n;
            cplx s = 0.0;
            for (int m = c.order_min; m <= c.order_max; ++m) s += c[m] * std::polar(1.0, m * th);
            const double e = std::abs(s - std::polar(1.0, args.phase(th)));
            max_err = std::max(max_err, e);
            mean_sq += e * e / n;
        }
        EXPECT_LT(max_err, 10.0 * std::sqrt(tol));
        EXPECT_NEAR(mean_sq, c.residual_energy, 1e-12);
    }
}

TEST(GbfOracle, KnownValues) {
    EXPECT_NEAR(gbf_oracle(GbfArgs::from({1.0}, {0.0}), 1).real(), 0.4400505857449335, 1e-11);
    EXPECT_NEAR(gbf_oracle(GbfArgs::from({1.0}, {0.0}), 1).real(), bessel_series(1, 1.0), 1e-11);
    for (int m : {-3, 1, 2, 7}) EXPECT_LT(std::abs(gbf_oracle(GbfArgs::from({0.0}, {0.0}), m)), 1e-12);
    const cplx c0 = gbf_oracle(GbfArgs::from({0.0}, {1.0}), 0);
    EXPECT_NEAR(c0.real(), 0.7651976865579666, 1e-11);
    EXPECT_NEAR(c0.imag(), 0.0, 1e-11);
    EXPECT_THROW(gbf_oracle(GbfArgs::from({1.0}, {0.0}), 20000), Error);
}

TEST(GbfPartial, RecurrenceAtSimplePoints) {
    const auto a0 = GbfArgs::from({0.0}, {0.0});
    const auto d0 = gbf_partial(a0, gbf_coefficients(a0, 6), 1, Wrt::alpha);
    EXPECT_NEAR(std::abs(d0[1] - 0.5), 0.0, 1e-15);
    const auto a1 = GbfArgs::from({1.0}, {0.0});
    const auto d1 = gbf_partial(a1, gbf_coefficients(a1, 20), 1, Wrt::alpha);
    EXPECT_NEAR(d1[0].real(), -bessel_series(1, 1.0), 1e-12);
}

TEST(GbfPartial, MatchesCentralDifferences) {
    std::mt19937_64 rng(3);
    const double h = 1e-6;
    for (int trial = 0; trial < 4; ++trial) {
        const auto args = random_args(rng, 3, true);
        const int M = truncation_order(args, 1e-14) + 4;
        const auto c = gbf_coefficients(args, M);
        for (int k = 1; k <= 3; ++k) {
            for (Wrt w : {Wrt::alpha, Wrt::beta}) {
                const auto d = gbf_partial(args, c, k, w);
                auto plus = args, minus = args;
                auto& vp = w == Wrt::alpha ? plus.alphas : plus.betas;
                auto& vm = w == Wrt::alpha ? minus.alphas : minus.betas;
                vp[k - 1] += h;
                vm[k - 1] -= h;
                plus.kind = minus.kind = GbfKind::mixed;
                const auto cp = gbf_coefficients(plus, M);
                const auto cm = gbf_coefficients(minus, M);
                double scale = 0.0, err = 0.0;
                for (int m = d.order_min; m <= d.order_max; ++m) {
                    const cplx fd = (cp[m] - cm[m]) / (2.0 * h);
                    scale = std::max(scale, std::abs(fd));
                    err = std::max(err, std::abs(fd - d[m]));
                }
                EXPECT_LT(err / scale, 1e-5) << "k=" << k;
            }
        }
    }
}

TEST(GbfPartial, InsufficientMarginIsAnError) {
    const auto a = GbfArgs::from({1.0, 0.5, 0.2}, {0.0, 0.0, 0.0});
    EXPECT_THROW(gbf_partial(a, gbf_coefficients(a, 2), 3, Wrt::alpha), Error);
    EXPECT_THROW(gbf_partial(a, gbf_coefficients(a, 8), 4, Wrt::alpha), Error);
}
