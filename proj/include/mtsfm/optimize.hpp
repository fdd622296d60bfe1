#pragma once

// Constrained sidelobe minimization over modulation indices, multi-trial
// studies, and the two-index objective landscape.

#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mtsfm/ambiguity.hpp"
#include "mtsfm/objective.hpp"
#include "mtsfm/solver.hpp"
#include "mtsfm/waveform.hpp"

namespace mtsfm {

struct OptimizeReport {
    ModulationIndices initial;
    ModulationIndices final_design;
    double objective_initial = 0.0;
    double objective_final = 0.0;
    std::vector<double> history;  // objective at each accepted (feasible, improving) iterate
    double rms_ratio = 1.0;       // beta_rms^2 / initial beta_rms^2 at the final design
    double constraint_residual = 0.0;
    double G = 1.0;               // objective_initial / objective_final
    int iterations = 0;
    int evaluations = 0;
    int order = 0;
    double tau_m_initial = 0.0;
    double tau_m_final = 0.0;
    std::string status;
    double wall_seconds = 0.0;

    double mainlobe_change() const {
        return tau_m_initial > 0.0 ? std::abs(tau_m_final - tau_m_initial) / tau_m_initial : 0.0;
    }
};

// Radial rescale onto the corridor (1 - delta) <= r <= (1 + delta); exact
// because r is a homogeneous quadratic in the free indices.
inline std::vector<double> project_to_corridor(const DesignObjective& obj, std::vector<double> x, double delta) {
    const double r = obj.rms_ratio(x);
    if (!(r > 0.0)) return x;
    const double target = std::clamp(r, 1.0 - delta, 1.0 + delta);
    if (target == r) return x;
    const double s = std::sqrt(target / r);
    for (auto& v : x) v *= s;
    return x;
}

inline OptimizeReport minimize(const ModulationIndices& idx0, const OptimizeProblem& prob) {
    const auto t_start = std::chrono::steady_clock::now();
    const DesignObjective obj(idx0, prob);
    OptimizeReport rep;
    rep.initial = idx0;
    rep.final_design = idx0;
    rep.order = obj.order();
    rep.tau_m_initial = obj.tau_m();
    rep.tau_m_final = obj.tau_m();
    const double delta = prob.delta;
    auto finish = [&](const char* status) {
        rep.status = status;
        rep.G = rep.objective_final > 0.0 ? rep.objective_initial / rep.objective_final
                                          : (rep.objective_initial > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return rep;
    };

    std::vector<double> x0 = obj.pack(idx0);
    std::vector<double> g0;
    rep.objective_initial = obj.value_grad(x0, g0);
    rep.objective_final = rep.objective_initial;
    rep.history.push_back(rep.objective_initial);
    rep.evaluations = 1;
    if (prob.rms_constraint && !(obj.reference_moment() > 0.0)) throw Error("start design has zero RMS bandwidth");
    if (rep.objective_initial == 0.0) return finish("zero_objective");
    const double scale = 1.0 / rep.objective_initial;
    if (solver::norm_inf(g0) * scale <= prob.stop.gradient_tol) return finish("stationary_start");

    if (prob.perturb_zero_coordinates) {
        std::mt19937_64 rng(prob.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& v : x0)
            if (v == 0.0) v = 1e-8 * gauss(rng);
    }

    std::vector<double> best_x = obj.pack(idx0);
    double best_f = rep.objective_initial;
    // The hook sees the point of the most recent evaluation; cache its raw value.
    std::vector<double> last_x;
    double last_f = 0.0;
    const solver::ValueGrad F = [&](const solver::Vec& x, solver::Vec& g) {
        const double f = obj.value_grad(x, g);
        for (auto& v : g) v *= scale;
        last_x = x;
        last_f = f;
        return f * scale;
    };
    auto feasible = [&](const std::vector<double>& x) {
        if (!prob.rms_constraint) return true;
        const double r = obj.rms_ratio(x);
        return r >= 1.0 - delta && r <= 1.0 + delta;
    };
    auto offer = [&](const std::vector<double>& x, double f) {
        if (f < best_f && feasible(x)) {
            best_f = f;
            best_x = x;
            rep.history.push_back(f);
        }
    };
    const solver::IterateHook hook = [&](const solver::Vec& x, double) {
        if (x == last_x) offer(x, last_f);
    };

    solver::LbfgsOptions in;
    in.max_iters = prob.stop.max_iters;
    in.gradient_tol = prob.stop.gradient_tol;
    in.step_tol = prob.stop.step_tol;
    in.initial_step = prob.stop.initial_step;
    std::string status;
    std::vector<double> x_end;
    if (prob.rms_constraint) {
        std::vector<solver::Constraint> cons;
        cons.push_back({[&](const solver::Vec& x, solver::Vec* g) {
            const double r = obj.rms_ratio(x, g);
            if (g)
                for (auto& v : *g) v = -v;
            return (1.0 - delta) - r;
        }});
        cons.push_back({[&](const solver::Vec& x, solver::Vec* g) { return obj.rms_ratio(x, g) - (1.0 + delta); }});
        solver::AugLagOptions al;
        al.inner = in;
        const auto r = solver::augmented_lagrangian(F, cons, x0, al, hook);
        rep.iterations = r.iterations;
        rep.evaluations += r.evaluations + 1;
        status = solver::to_string(r.status);
        x_end = project_to_corridor(obj, r.x, delta);
    } else {
        const auto r = solver::lbfgs(F, x0, in, hook);
        rep.iterations = r.iterations;
        rep.evaluations += r.evaluations;
        status = solver::to_string(r.status);
        x_end = r.x;
    }
    offer(x_end, obj.value(x_end));
    ++rep.evaluations;

    rep.final_design = obj.unpack(best_x);
    rep.objective_final = best_f;
    rep.rms_ratio = obj.reference_moment() > 0.0 ? obj.rms_ratio(best_x) : 1.0;
    rep.constraint_residual = prob.rms_constraint
                                  ? std::max({0.0, (1.0 - delta) - rep.rms_ratio, rep.rms_ratio - (1.0 + delta)})
                                  : 0.0;
    rep.tau_m_final = mainlobe_null(ClosedFormModel(rep.final_design, prob.quad.tol), obj.delta_f(), prob.quad);
    return finish(status.c_str());
}

inline OptimizeReport minimize_isr(const ModulationIndices& idx0, OptimizeProblem prob) {
    prob.objective = ObjectiveKind::isr;
    return minimize(idx0, prob);
}

inline OptimizeReport minimize_af_volume(const ModulationIndices& idx0, OptimizeProblem prob) {
    prob.objective = ObjectiveKind::af_volume;
    return minimize(idx0, prob);
}

// Box-plot summary: type-7 quartiles, whiskers at the most extreme samples
// inside the 1.5 IQR inner fences.
struct BoxStats {
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    double whisker_lo = 0.0, whisker_hi = 0.0;
    double fence_lo = 0.0, fence_hi = 0.0;
    double mean = 0.0;
    std::vector<double> outliers;
};

inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw Error("quantile of empty set");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline BoxStats box_stats(const std::vector<double>& v) {
    BoxStats b;
    if (v.empty()) return b;
    b.q1 = quantile(v, 0.25);
    b.median = quantile(v, 0.5);
    b.q3 = quantile(v, 0.75);
    const double iqr = b.q3 - b.q1;
    b.fence_lo = b.q1 - 1.5 * iqr;
    b.fence_hi = b.q3 + 1.5 * iqr;
    b.whisker_lo = std::numeric_limits<double>::infinity();
    b.whisker_hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double x : v) {
        sum += x;
        if (x < b.fence_lo || x > b.fence_hi) {
            b.outliers.push_back(x);
            continue;
        }
        b.whisker_lo = std::min(b.whisker_lo, x);
        b.whisker_hi = std::max(b.whisker_hi, x);
    }
    b.mean = sum / static_cast<double>(v.size());
    std::sort(b.outliers.begin(), b.outliers.end());
    return b;
}

struct TrialRecord {
    std::uint64_t seed = 0;
    double A0 = 0.0, A_opt = 0.0;
    double G = 0.0, G_tilde = 0.0;
    double isr_initial_db = 0.0, isr_final_db = 0.0;
    double rms_ratio = 0.0;
    int iterations = 0;
    bool feasible = false;
    std::string status;
    std::string error;
};

struct StudyReport {
    std::size_t K = 0;
    double tbp = 0.0;
    Symmetry symmetry = Symmetry::even;
    std::uint64_t seed = 0;
    std::vector<TrialRecord> trials;
    BoxStats G, isr_initial_db, isr_final_db;
    double median_G = 0.0;
    double mean_G = 0.0;
    bool all_feasible = false;
};

// n independent runs from random thumbtack starts; trial i uses seed + i.
// G_i = A0(i)/A_opt(i), G~_i = min_j A_opt(j) / A_opt(i).
inline StudyReport trial_study(std::size_t n_trials, std::size_t K, double tbp, Symmetry symmetry,
                               const OptimizeProblem& prob, std::uint64_t seed, unsigned threads = 1) {
    if (n_trials < 1) throw Error("n_trials must be at least 1");
    StudyReport st;
    st.K = K;
    st.tbp = tbp;
    st.symmetry = symmetry;
    st.seed = seed;
    st.trials.resize(n_trials);
    OptimizeProblem p = prob;
    p.free_set = symmetry;
    p.threads = 1;
    auto run = [&](std::size_t i) {
        TrialRecord& tr = st.trials[i];
        tr.seed = seed + i;
        try {
            const auto idx = random_thumbtack_init(K, tbp, symmetry, tr.seed);
            OptimizeProblem pi = p;
            pi.seed = tr.seed;
            const auto rep = minimize(idx, pi);
            tr.A0 = rep.objective_initial;
            tr.A_opt = rep.objective_final;
            tr.G = rep.G;
            tr.isr_initial_db = db10(rep.objective_initial);
            tr.isr_final_db = db10(rep.objective_final);
            tr.rms_ratio = rep.rms_ratio;
            tr.iterations = rep.iterations;
            tr.feasible = rep.constraint_residual <= 1e-6;
            tr.status = rep.status;
        } catch (const std::exception& e) {
            tr.error = e.what();
            tr.status = "failed";
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
    if (nt == 1) {
        for (std::size_t i = 0; i < n_trials; ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n_trials; i += nt) run(i);
            });
        for (auto& th : pool) th.join();
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& tr : st.trials)
        if (tr.error.empty()) best = std::min(best, tr.A_opt);
    std::vector<double> gs, ii, ff;
    st.all_feasible = true;
    for (auto& tr : st.trials) {
        if (!tr.error.empty()) {
            st.all_feasible = false;
            continue;
        }
        tr.G_tilde = tr.A_opt > 0.0 ? best / tr.A_opt : 1.0;
        st.all_feasible = st.all_feasible && tr.feasible;
        gs.push_back(tr.G);
        ii.push_back(tr.isr_initial_db);
        ff.push_back(tr.isr_final_db);
    }
    if (!gs.empty()) {
        st.G = box_stats(gs);
        st.isr_initial_db = box_stats(ii);
        st.isr_final_db = box_stats(ff);
        st.median_G = st.G.median;
        st.mean_G = st.G.mean;
    }
    return st;
}

// int_{-T}^{T} |R(tau)|^2 dtau from samples: by Parseval on the zero-padded
// correlation, h^3 / L * sum_k |X_k|^4.
inline double acf_area_direct(const SampledWaveform& w) {
    const std::size_t L = next_pow2(2 * w.size());
    std::vector<cplx> buf(L);
    std::copy(w.samples.begin(), w.samples.end(), buf.begin());
    fft::forward(buf);
    double acc = 0.0;
    for (const auto& v : buf) {
        const double p = std::norm(v);
        acc += p * p;
    }
    const double h = 1.0 / w.fs;
    return acc * h * h * h / static_cast<double>(L);
}

struct Landscape {
    std::vector<double> alpha1, alpha2;
    std::vector<double> values;  // row-major: alpha1 index major
    struct Minimum {
        std::size_t i, j;
        double a1, a2, value;
    };
    std::vector<Minimum> minima;

    double at(std::size_t i, std::size_t j) const { return values[i * alpha2.size() + j]; }
};

// ACF area over a two-index even design on an n x n grid of [lo, hi]^2, with
// strict interior local minima against all eight neighbours.
inline Landscape acf_area_landscape(std::size_t n = 200, double lo = 0.0, double hi = 10.0, double T = 1.0,
                                    unsigned threads = 1) {
    if (n < 3) throw Error("landscape grid needs at least 3 points per axis");
    Landscape ls;
    ls.alpha1 = linspace(lo, hi, n);
    ls.alpha2 = linspace(lo, hi, n);
    ls.values.assign(n * n, 0.0);
    // One sample rate for the whole grid: ten times the largest sweep.
    const double max_sweep = 2.0 * (std::max(std::abs(lo), std::abs(hi)) * 3.0) / T;
    const double fs = 10.0 * std::max(max_sweep, 1.0 / T);
    auto row = [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto idx = ModulationIndices::even({ls.alpha1[i], ls.alpha2[j]}, T);
            ls.values[i * n + j] = acf_area_direct(synthesize(idx, fs));
        }
    };
    const unsigned nt = std::max(1u, threads);
    if (nt == 1) {
        for (std::size_t i = 0; i < n; ++i) row(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += nt) row(i);
            });
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 1; i + 1 < n; ++i)
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double v = ls.at(i, j);
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1 && is_min; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    is_min = v < ls.at(static_cast<std::size_t>(static_cast<int>(i) + di),
                                       static_cast<std::size_t>(static_cast<int>(j) + dj));
                }
            if (is_min) ls.minima.push_back({i, j, ls.alpha1[i], ls.alpha2[j], v});
        }
    return ls;
}

}  // namespace mtsfm
