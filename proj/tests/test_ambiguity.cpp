#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mtsfm/ambiguity.hpp"

using namespace mtsfm;

namespace {

// Composite Simpson of (1/T) int s~(t - tau/2) conj(s~(t + tau/2)) e^{j 2 pi nu t} dt
// over the pulse overlap, using the analytic phase only.
cplx af_time_domain(const ModulationIndices& idx, double tau, double nu, int intervals = 200000) {
    const double T = idx.T;
    const double half = 0.5 * (T - std::abs(tau));
    if (half <= 0.0) return 0.0;
    const double h = 2.0 * half / intervals;
    auto f = [&](double t) {
        return std::polar(1.0 / T, idx.phase(t - 0.5 * tau) - idx.phase(t + 0.5 * tau) + two_pi * nu * t);
    };
    cplx acc = f(-half) + f(half);
    for (int i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(-half + i * h);
    return acc * h / 3.0;
}

std::vector<double> sample_lags(const SampledWaveform& w, double lo, double hi, std::size_t n) {
    auto t = linspace(lo, hi, n);
    for (auto& v : t) v = std::round(v * w.fs) / w.fs;
    return t;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(AcfClosedForm, ZeroIndicesGiveTriangle) {
    for (double T : {1.0, 2.5}) {
        const auto idx = presets::zero(3, T);
        const auto t = linspace(-1.2 * T, 1.2 * T, 97);
        const auto R = acf_closed_form(idx, t);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double ref = std::max(0.0, (T - std::abs(t[i])) / T);
            EXPECT_NEAR(std::abs(R[i] - ref), 0.0, 1e-13);
        }
        const double edges[] = {-T, T};
        for (const auto& v : acf_closed_form(idx, edges)) EXPECT_EQ(std::abs(v), 0.0);
    }
}

TEST(AcfClosedForm, Table1SubRegionIsr) {
    EXPECT_NEAR(isr(presets::table1(), DelayDopplerRegion::band(std::nullopt, 0.2)), -2.56, 0.2);
}

TEST(AcfClosedForm, MatchesDirectCorrelation) {
    const auto idx = presets::table1();
    const auto w = synthesize(idx, 10.0 * swept_bandwidth(idx));
    const auto t = sample_lags(w, -idx.T, idx.T, 1024);
    EXPECT_LT(max_abs_diff(acf_closed_form(idx, t), acf_direct(w, t)), 1e-6);
}

TEST(AfClosedForm, OriginIsUnity) {
    EXPECT_NEAR(std::abs(af_closed_form(presets::table1(), 0.0, 0.0) - 1.0), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(af_closed_form(ModulationIndices{0.0, {0.4}, {-1.1}, 2.0}, 0.0, 0.0) - 1.0), 0.0, 1e-9);
}

TEST(AfClosedForm, SimplePulseZeroDelayColumn) {
    const double T = 2.0;
    const ClosedFormModel model(presets::zero(1, T));
    for (double nu = -4.0; nu <= 4.0; nu += 0.1) {
        const double x = pi * nu * T;
        EXPECT_NEAR(std::abs(model.af(0.0, nu) - (x == 0.0 ? 1.0 : std::sin(x) / x)), 0.0, 1e-12);
    }
}

TEST(AfClosedForm, Table1MatchesTimeDomainOracle) {
    const auto idx = presets::table1();
    const ClosedFormModel model(idx, 1e-12);
    for (auto [tau, nu] : {std::pair{0.1, 3.0}, {-0.37, 1.5}, {0.004, -7.0}, {0.8, 40.0}}) {
        EXPECT_LT(std::abs(model.af(tau, nu) - af_time_domain(idx, tau, nu)), 1e-8) << tau << " " << nu;
    }
}

TEST(AfClosedForm, MatchesDirectAtRandomPoints) {
    const auto idx = presets::table1();
    const auto w = synthesize(idx, 10.0 * swept_bandwidth(idx));
    const ClosedFormModel model(idx);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ut(-1.0, 1.0), un(-250.0, 250.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double tau = std::round(ut(rng) * w.fs) / w.fs;
        const double nu[1] = {un(rng)};
        const double taus[1] = {tau};
        const double direct = std::sqrt(af_direct(w, taus, nu).values[0]);
        worst = std::max(worst, std::abs(std::abs(model.af(tau, nu[0])) - direct));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(AcfDirect, UnitPeakHermitianAndBounded) {
    const auto w = synthesize(random_thumbtack_init(12, 60.0, Symmetry::full, 9), 800.0, parse_taper("tukey:0.2"));
    const auto t = sample_lags(w, -1.0, 1.0, 801);
    const auto R = acf_direct(w, t);
    const std::size_t mid = t.size() / 2;
    EXPECT_NEAR(std::abs(R[mid] - 1.0), 0.0, 1e-9);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_NEAR(std::abs(R[i] - std::conj(R[t.size() - 1 - i])), 0.0, 1e-12);
        EXPECT_LE(std::abs(R[i]), std::abs(R[mid]) + 1e-12);
    }
}

TEST(AcfDirect, SingleToneMatchesClosedForm) {
    const auto idx = ModulationIndices::even({8.0}, 1.0);
    const auto w = synthesize(idx, 400.0);
    const auto t = sample_lags(w, 0.0, 1.0, 301);
    const auto Rc = acf_closed_form(idx, t, 1e-14);
    const auto Rd = acf_direct(w, t);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(std::abs(Rd[i]), std::abs(Rc[i]), 1e-6);
}

TEST(AcfDirect, TimeReversalKeepsMagnitude) {
    const auto w = synthesize(random_thumbtack_init(8, 40.0, Symmetry::full, 2), 400.0);
    auto rev = w;
    std::reverse(rev.samples.begin(), rev.samples.end());
    const auto t = sample_lags(w, -1.0, 1.0, 201);
    const auto a = acf_direct(w, t), b = acf_direct(rev, t);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(std::abs(a[i]), std::abs(b[i]), 1e-12);
}

TEST(AfDirect, SimplePulseZeroDopplerIsTriangle) {
    const auto w = synthesize(presets::zero(1, 1.0), 200.0);
    const auto t = sample_lags(w, -1.0, 1.0, 41);
    const double nu[1] = {0.0};
    const auto s = af_direct(w, t, nu);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(std::sqrt(s.at(i, 0)), 1.0 - std::abs(t[i]), 1e-12);
}

TEST(AfDirect, SymmetryAndTotalVolume) {
    const auto w = synthesize(random_thumbtack_init(6, 20.0, Symmetry::full, 5), 200.0);
    const auto N = static_cast<long long>(w.size());
    std::vector<double> t, nu;
    for (long long l = -N; l <= N; ++l) t.push_back(static_cast<double>(l) / w.fs);
    const long long L = 4 * N;
    for (long long j = -L / 2; j < L / 2; ++j) nu.push_back(static_cast<double>(j) * w.fs / static_cast<double>(L));
    // Odd-length Doppler grid centred on zero for the mirror check.
    nu.push_back(static_cast<double>(L / 2) * w.fs / static_cast<double>(L));
    const auto s = af_direct(w, t, nu);
    const std::size_t nt = t.size(), nv = nu.size();
    EXPECT_NEAR(s.at(nt / 2, nv / 2), 1.0, 1e-9);
    double worst = 0.0;
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < nv; ++j)
            worst = std::max(worst, std::abs(std::sqrt(s.at(i, j)) - std::sqrt(s.at(nt - 1 - i, nv - 1 - j))));
    EXPECT_LT(worst, 1e-9);
    EXPECT_NEAR(s.volume(), 1.0, 1e-3);
}

TEST(AfDirect, Table1PedestalNearInverseTbp) {
    const auto idx = presets::table1();
    const auto w = synthesize(idx, 10.0 * swept_bandwidth(idx));
    std::vector<double> t, nu;
    for (double x = 0.1; x <= 0.6; x += 0.01) t.push_back(std::round(x * w.fs) / w.fs);
    for (int j = -150; j <= 150; j += 3) nu.push_back(j);
    const auto s = af_direct(w, t, nu);
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(s.values.size());
    // Away from the mainlobe |chi|^2 averages ~ (1 - |tau|/T) / TBP.
    double weight = 0.0;
    for (double x : t) weight += 1.0 - x;
    weight /= static_cast<double>(t.size());
    EXPECT_NEAR(db10(mean / weight), db10(1.0 / 200.0), 3.0);
}

TEST(AfClosedForm, OddSetsCoupleDelayAndDoppler) {
    auto ridge_delay = [](const ModulationIndices& idx) {
        const ClosedFormModel model(idx, 1e-12);
        const double nu = 2.0 / idx.T;
        double best = -1.0, at = 0.0;
        for (double tau = -0.1; tau <= 0.1 + 1e-12; tau += 1e-4) {
            const double v = std::abs(model.af(tau, nu));
            if (v > best) best = v, at = tau;
        }
        return at;
    };
    const auto odd = ModulationIndices::odd({3.0, -1.5, 0.8}, 1.0);
    EXPECT_GT(std::abs(ridge_delay(odd)), 1e-3);

    const auto even = ModulationIndices::even({3.0, -1.5, 0.8}, 1.0);
    const ClosedFormModel model(even, 1e-12);
    for (double tau : {0.01, 0.05, 0.2, 0.6})
        for (double nu : {-7.0, 2.0, 5.5}) EXPECT_NEAR(std::abs(model.af(tau, nu)), std::abs(model.af(-tau, nu)), 1e-10);
}

TEST(FirstNull, SimplePulseEdge) {
    EXPECT_DOUBLE_EQ(mainlobe_null(presets::zero(1, 1.0)), 1.0);
    EXPECT_DOUBLE_EQ(mainlobe_null(presets::zero(1, 3.0)), 3.0);
}

TEST(FirstNull, SingleToneScalesWithBandwidth) {
    const auto idx = ModulationIndices::even({20.0}, 1.0);
    const double df = swept_bandwidth(idx);
    // Dense-grid oracle: first local minimum of |R| below -6 dB.
    const auto t = linspace(0.0, 0.5, 50001);
    const auto R = acf_closed_form(idx, t, 1e-14);
    double ref = 0.0;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        const double y = std::abs(R[i]);
        if (y <= std::abs(R[i - 1]) && y <= std::abs(R[i + 1]) && y < 0.5) {
            ref = t[i];
            break;
        }
    }
    const double tm = mainlobe_null(idx);
    // Parabolic refinement lands within a small fraction of the search step.
    EXPECT_NEAR(tm, ref, 0.05 / (QuadConfig{}.null_search_samples_per_res * df));
    EXPECT_GE(tm * df, 0.5);
    EXPECT_LE(tm * df, 2.0);
}

TEST(FirstNull, Table1WithinResolutionCell) {
    const auto idx = presets::table1();
    const double df = swept_bandwidth(idx);
    const double tm = mainlobe_null(idx);
    EXPECT_GE(tm, 0.5 / df);
    EXPECT_LE(tm, 2.0 / df);
}

TEST(FirstNull, MissingNullIsAnError) {
    const auto t = linspace(0.0, 0.4, 41);
    std::vector<cplx> R;
    for (double x : t) R.emplace_back(1.0 - x);
    EXPECT_THROW(first_null(R, t), Error);
    const auto t2 = linspace(0.1, 0.4, 41);
    EXPECT_THROW(first_null(R, t2), Error);
}

TEST(Isr, SimplePulseFullBand) {
    const auto parts = isr_detail(presets::zero(1, 1.0), DelayDopplerRegion::band(std::nullopt, 1.0));
    EXPECT_DOUBLE_EQ(parts.tau_m, 1.0);
    // int_{-T}^{T} (1 - |tau|/T)^2 dtau = 2T/3
    EXPECT_NEAR(db10(parts.mainlobe_area), db10(2.0 / 3.0), 1e-3);
    EXPECT_EQ(parts.sidelobe_area, 0.0);
    EXPECT_TRUE(std::isinf(parts.db()) && parts.db() < 0.0);
}

TEST(Isr, RegionErrors) {
    const auto idx = presets::table1();
    EXPECT_THROW(isr(idx, DelayDopplerRegion::band(0.001, 0.2)), Error);
    EXPECT_THROW(isr(idx, DelayDopplerRegion::ellipse(0.0, 0.0, 0.1, 0.5)), Error);
    EXPECT_THROW(isr(idx, DelayDopplerRegion::band(0.3, 0.2)), Error);
    EXPECT_THROW(DelayDopplerRegion::ellipse(0.0, 0.0, 0.0, 1.0).validate(), Error);
    EXPECT_THROW(DelayDopplerRegion::annulus(0.2, 0.1, 0.1, 0.5).validate(), Error);
}

TEST(Isr, SampledAgreesAndTaperEffectIsSmall) {
    const auto idx = presets::table1();
    const auto region = DelayDopplerRegion::band(std::nullopt, 0.2);
    const double fs = 10.0 * swept_bandwidth(idx);
    const double closed = isr(idx, region);
    const double rect = isr_sampled(synthesize(idx, fs), region).db();
    const double tukey = isr_sampled(synthesize(idx, fs, parse_taper("tukey:0.05")), region).db();
    EXPECT_NEAR(rect, closed, 0.1);
    EXPECT_LT(std::abs(tukey - rect), 0.5);
}

TEST(RegionVolume, OutsidePulseSupportIsZero) {
    const auto v = af_region_volume(presets::table1(), DelayDopplerRegion::ellipse(1.5, 0.0, 0.2, 1.0));
    EXPECT_EQ(v, 0.0);
}

TEST(RegionVolume, WholePlaneIsUnity) {
    const auto idx = ModulationIndices::even({1.5, 0.0, 0.4}, 1.0);
    auto band = DelayDopplerRegion::band(0.0, 1.0);
    band.nu_max = swept_bandwidth(idx) * idx.T + 200.0;
    QuadConfig cfg;
    cfg.samples_per_res_nu = 4.0;
    const auto r = af_region_volume_detail(idx, band, cfg, false);
    EXPECT_NEAR(r.volume, 1.0, 5e-3);
    EXPECT_FALSE(r.hofstetter_ok);
}

TEST(RegionVolume, AreaAndErrors) {
    const auto e = DelayDopplerRegion::ellipse(0.0, 0.0, 0.1, 0.5);
    EXPECT_NEAR(e.area(), pi * 0.05, 1e-15);
    EXPECT_TRUE(e.below_hofstetter_bound());
    const auto a = DelayDopplerRegion::annulus(0.1, 0.3, 0.15, 0.9);
    EXPECT_NEAR(a.area(), pi * (0.135 - 0.03), 1e-15);
    EXPECT_FALSE(a.contains(0.0, 0.0));
    EXPECT_TRUE(a.contains(0.12, 0.0));
    auto empty = DelayDopplerRegion::band(0.5, 0.5);
    empty.nu_max = 1.0;
    EXPECT_THROW(af_region_volume(presets::table1(), empty), Error);
    EXPECT_THROW(af_region_volume(presets::table1(), DelayDopplerRegion::band(std::nullopt, 0.2)), Error);
}
