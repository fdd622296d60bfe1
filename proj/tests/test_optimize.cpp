#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mtsfm/io.hpp"
#include "mtsfm/optimize.hpp"

using namespace mtsfm;

namespace {

// max |g - g_fd| / max |g_fd| with relative step 1e-6 per coordinate.
double fd_relative_error(const DesignObjective& obj, const std::vector<double>& x) {
    std::vector<double> g;
    obj.value_grad(x, g);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (obj.value(xp) - obj.value(xm)) / (2.0 * h);
        err = std::max(err, std::abs(fd - g[i]));
        scale = std::max(scale, std::abs(fd));
    }
    return err / scale;
}

OptimizeProblem quick_problem(int iters) {
    OptimizeProblem p;
    p.region = DelayDopplerRegion::band(std::nullopt, 1.0);
    p.stop.max_iters = iters;
    return p;
}

}  // namespace

TEST(Solver, LbfgsFindsRosenbrockMinimum) {
    const solver::ValueGrad f = [](const solver::Vec& x, solver::Vec& g) {
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        g = {-2.0 * a - 400.0 * x[0] * b, 200.0 * b};
        return a * a + 100.0 * b * b;
    };
    solver::LbfgsOptions opt;
    opt.gradient_tol = 1e-10;
    opt.initial_step = 0.1;
    std::vector<double> seen;
    const auto r = solver::lbfgs(f, {-1.2, 1.0}, opt, [&](const solver::Vec&, double v) { seen.push_back(v); });
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_NEAR(r.x[1], 1.0, 1e-6);
    EXPECT_EQ(r.status, solver::Status::gradient);
    for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LE(seen[i], seen[i - 1]);
}

TEST(Solver, AugmentedLagrangianHandlesActiveInequality) {
    // min (x-2)^2 + (y-2)^2 subject to x^2 + y^2 <= 1.
    const solver::ValueGrad f = [](const solver::Vec& x, solver::Vec& g) {
        g = {2.0 * (x[0] - 2.0), 2.0 * (x[1] - 2.0)};
        return (x[0] - 2.0) * (x[0] - 2.0) + (x[1] - 2.0) * (x[1] - 2.0);
    };
    std::vector<solver::Constraint> cons{{[](const solver::Vec& x, solver::Vec* g) {
        if (g) *g = {2.0 * x[0], 2.0 * x[1]};
        return x[0] * x[0] + x[1] * x[1] - 1.0;
    }}};
    solver::AugLagOptions opt;
    opt.inner.gradient_tol = 1e-10;
    const auto r = solver::augmented_lagrangian(f, cons, {0.0, 0.5}, opt);
    EXPECT_NEAR(r.x[0], std::sqrt(0.5), 1e-5);
    EXPECT_NEAR(r.x[1], std::sqrt(0.5), 1e-5);
    EXPECT_LT(r.violation, 1e-8);
}

TEST(Objective, IsrGradientAtTable1) {
    const auto idx = presets::table1();
    const DesignObjective obj(idx, OptimizeProblem{});
    EXPECT_LT(fd_relative_error(obj, obj.pack(idx)), 1e-5);
}

TEST(Objective, GradientsAtRandomPoints) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto idx = random_thumbtack_init(6, 30.0, Symmetry::full, seed);
        OptimizeProblem p;
        p.free_set = Symmetry::full;
        p.region = DelayDopplerRegion::band(std::nullopt, 0.5);
        const DesignObjective isr_obj(idx, p);
        EXPECT_LT(fd_relative_error(isr_obj, isr_obj.pack(idx)), 1e-5) << "isr seed " << seed;
        p.objective = ObjectiveKind::af_volume;
        p.region = DelayDopplerRegion::ellipse(0.2, 1.0, 0.1, 0.6);
        const DesignObjective vol_obj(idx, p);
        EXPECT_LT(fd_relative_error(vol_obj, vol_obj.pack(idx)), 1e-5) << "volume seed " << seed;
    }
}

TEST(Objective, AcfAreaGradientOnTwoIndexToy) {
    OptimizeProblem p;
    p.objective = ObjectiveKind::acf_area;
    const auto idx = ModulationIndices::even({3.3, 5.1});
    const DesignObjective obj(idx, p);
    EXPECT_LT(fd_relative_error(obj, obj.pack(idx)), 1e-5);
    // Dense-grid slope along alpha_1.
    const double h = 1e-3;
    const double slope = (obj.value(std::vector<double>{3.3 + h, 5.1}) - obj.value(std::vector<double>{3.3 - h, 5.1})) / (2 * h);
    EXPECT_NEAR(objective_gradient(idx, p)[0], slope, 1e-5 * std::abs(slope) + 1e-9);
}

TEST(Objective, SymmetryForcesZeroComponents) {
    // |R| is unchanged by alpha -> -alpha, so the alpha partials vanish at alpha = 0.
    auto idx = random_thumbtack_init(5, 25.0, Symmetry::odd, 7);
    OptimizeProblem p;
    p.free_set = Symmetry::full;
    p.region = DelayDopplerRegion::band(std::nullopt, 0.6);
    const auto g = objective_gradient(idx, p);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    for (std::size_t k = 0; k < idx.K(); ++k) EXPECT_LT(std::abs(g[k]), 1e-10 * gmax);
}

TEST(Objective, ValueEqualsIsrRatio) {
    const auto idx = presets::table1();
    const OptimizeProblem p;
    const DesignObjective obj(idx, p);
    // Same nodes; the objective keeps extra GBF orders for its gradient.
    EXPECT_NEAR(db10(obj.value(idx)), isr(idx, p.region, p.quad), 1e-6);
    EXPECT_NEAR(obj.tau_m(), mainlobe_null(idx, p.quad), 1e-15);
}

TEST(Minimize, StationaryStartReturnsImmediately) {
    OptimizeProblem p;
    p.objective = ObjectiveKind::acf_area;
    p.rms_constraint = false;
    const auto r = minimize(presets::zero(2), p);
    EXPECT_EQ(r.status, "stationary_start");
    EXPECT_EQ(r.iterations, 0);
    EXPECT_DOUBLE_EQ(r.G, 1.0);
}

TEST(Minimize, RegionOutsidePulseGivesZeroObjective) {
    OptimizeProblem p;
    p.objective = ObjectiveKind::af_volume;
    p.region = DelayDopplerRegion::ellipse(1.5, 0.0, 0.2, 1.0);
    const auto r = minimize(presets::table1(), p);
    EXPECT_EQ(r.objective_initial, 0.0);
    EXPECT_EQ(r.status, "zero_objective");
    EXPECT_EQ(r.iterations, 0);
    EXPECT_DOUBLE_EQ(r.G, 1.0);
}

TEST(Minimize, TwoIndexToyMatchesGridOracle) {
    OptimizeProblem p;
    p.objective = ObjectiveKind::acf_area;
    const auto start = ModulationIndices::even({4.02, 6.382});
    const auto r = minimize(start, p);
    const DesignObjective obj(start, p);
    const double a1 = r.final_design.alphas[0], a2 = r.final_design.alphas[1];
    // Exhaustive local grid of the same objective inside the corridor.
    double grid_min = std::numeric_limits<double>::infinity();
    for (int i = -10; i <= 10; ++i)
        for (int j = -10; j <= 10; ++j) {
            const std::vector<double> x{a1 + 0.01 * i, a2 + 0.01 * j};
            const double rr = obj.rms_ratio(x);
            if (rr < 1.0 - p.delta || rr > 1.0 + p.delta) continue;
            grid_min = std::min(grid_min, obj.value(x));
        }
    EXPECT_LE(r.objective_final, grid_min * (1.0 + 1e-9));
    EXPECT_LT(r.objective_final, r.objective_initial);
    EXPECT_LE(r.constraint_residual, 1e-6);
}

TEST(Minimize, IsrDescentAndFeasibility) {
    const auto idx = random_thumbtack_init(8, 40.0, Symmetry::even, 3);
    const auto r = minimize(idx, quick_problem(60));
    EXPECT_LT(r.objective_final, r.objective_initial);
    EXPECT_GE(r.rms_ratio, 0.8 - 1e-6);
    EXPECT_LE(r.rms_ratio, 1.2 + 1e-6);
    EXPECT_LE(r.constraint_residual, 1e-6);
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LT(r.history[i], r.history[i - 1]);
    EXPECT_DOUBLE_EQ(r.history.back(), r.objective_final);
    EXPECT_DOUBLE_EQ(r.G, r.objective_initial / r.objective_final);
}

TEST(Minimize, ReportsAreReproducible) {
    const auto idx = random_thumbtack_init(8, 40.0, Symmetry::even, 11);
    const auto a = minimize(idx, quick_problem(25));
    const auto b = minimize(idx, quick_problem(25));
    EXPECT_EQ(json(a).dump(), json(b).dump());
}

TEST(Minimize, RejectsBadProblems) {
    OptimizeProblem p;
    p.delta = 1.5;
    EXPECT_THROW(minimize(presets::table1(), p), Error);
    OptimizeProblem q;
    q.region = DelayDopplerRegion::ellipse(0.0, 0.0, 0.1, 0.5);
    EXPECT_THROW(minimize(presets::table1(), q), Error);
    OptimizeProblem o;
    o.free_set = Symmetry::odd;
    EXPECT_THROW(minimize(presets::table1(), o), Error);
    EXPECT_THROW(minimize(presets::zero(2), OptimizeProblem{}), Error);
}

TEST(BoxStatsTest, QuartilesFencesAndOutliers) {
    const auto b = box_stats({1, 2, 3, 4, 5, 6, 7, 8, 9, 100});
    EXPECT_DOUBLE_EQ(b.q1, 3.25);
    EXPECT_DOUBLE_EQ(b.median, 5.5);
    EXPECT_DOUBLE_EQ(b.q3, 7.75);
    EXPECT_DOUBLE_EQ(b.fence_lo, 3.25 - 6.75);
    EXPECT_DOUBLE_EQ(b.fence_hi, 7.75 + 6.75);
    EXPECT_DOUBLE_EQ(b.whisker_lo, 1.0);
    EXPECT_DOUBLE_EQ(b.whisker_hi, 9.0);
    ASSERT_EQ(b.outliers.size(), 1u);
    EXPECT_DOUBLE_EQ(b.outliers[0], 100.0);
    EXPECT_DOUBLE_EQ(b.mean, 14.5);
}

TEST(TrialStudy, SingleTrialNormalization) {
    const auto st = trial_study(1, 4, 16.0, Symmetry::even, quick_problem(15), 42);
    ASSERT_EQ(st.trials.size(), 1u);
    EXPECT_EQ(st.trials[0].seed, 42u);
    EXPECT_DOUBLE_EQ(st.trials[0].G_tilde, 1.0);
    EXPECT_DOUBLE_EQ(st.median_G, st.trials[0].G);
    EXPECT_THROW(trial_study(0, 4, 16.0, Symmetry::even, quick_problem(15), 1), Error);
}

TEST(TrialStudy, DeterministicAcrossThreadCounts) {
    const auto a = trial_study(3, 4, 16.0, Symmetry::odd, quick_problem(15), 5, 1);
    const auto b = trial_study(3, 4, 16.0, Symmetry::odd, quick_problem(15), 5, 3);
    EXPECT_EQ(json(a).dump(), json(b).dump());
    double best = 1.0;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.trials[i].seed, 5u + i);
        EXPECT_LE(a.trials[i].G_tilde, 1.0);
        best = std::min(best, std::abs(a.trials[i].G_tilde - 1.0));
    }
    EXPECT_EQ(best, 0.0);
}

TEST(TrialStudy, FailuresAreRecorded) {
    OptimizeProblem p = quick_problem(5);
    p.order_margin = 0.5;  // invalid for every trial
    const auto st = trial_study(2, 4, 16.0, Symmetry::even, p, 1);
    EXPECT_FALSE(st.all_feasible);
    for (const auto& tr : st.trials) {
        EXPECT_EQ(tr.status, "failed");
        EXPECT_FALSE(tr.error.empty());
    }
}

TEST(Landscape, SimplePulseAreaAndGridValues) {
    // int (1 - |tau|)^2 dtau over [-1, 1] = 2/3.
    EXPECT_NEAR(acf_area_direct(synthesize(presets::zero(1), 400.0)), 2.0 / 3.0, 1e-5);
    const auto ls = acf_area_landscape(5, 0.0, 4.0);
    ASSERT_EQ(ls.values.size(), 25u);
    const double fs = 10.0 * 2.0 * 4.0 * 3.0;
    EXPECT_DOUBLE_EQ(ls.at(2, 3), acf_area_direct(synthesize(ModulationIndices::even({2.0, 3.0}), fs)));
    EXPECT_THROW(acf_area_landscape(2), Error);
}
