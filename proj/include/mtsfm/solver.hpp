#pragma once

// Smooth local minimization: L-BFGS with a strong-Wolfe line search, and a
// PHR augmented-Lagrangian wrapper for inequality constraints c_i(x) <= 0.

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mtsfm/core.hpp"

namespace mtsfm::solver {

using Vec = std::vector<double>;
// f(x, g): returns the value and writes the gradient.
using ValueGrad = std::function<double(const Vec&, Vec&)>;
// Called after every accepted iterate.
using IterateHook = std::function<void(const Vec&, double)>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_inf(const Vec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

struct LbfgsOptions {
    int max_iters = 500;
    double gradient_tol = 1e-6;  // on the infinity norm
    double step_tol = 1e-10;     // relative change in x
    int memory = 10;
    int max_evals_per_search = 30;
    double initial_step = 1.0;  // length of the first (steepest-descent) step
};

enum class Status { gradient, step, max_iters, line_search };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::gradient: return "converged_gradient";
        case Status::step: return "converged_step";
        case Status::max_iters: return "max_iters";
        case Status::line_search: return "line_search_stalled";
    }
    return "?";
}

struct LbfgsResult {
    Vec x;
    double f = 0.0;
    Vec g;
    int iterations = 0;
    int evaluations = 0;
    Status status = Status::max_iters;
};

namespace detail {

// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), clamped to the
// bracket; falls back to bisection.
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
        const double lo = std::min(a, b), hi = std::max(a, b);
        const double margin = 0.1 * (hi - lo);
        if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
    }
    return 0.5 * (a + b);
}

}  // namespace detail

inline LbfgsResult lbfgs(const ValueGrad& fg, Vec x0, const LbfgsOptions& opt, const IterateHook& hook = {}) {
    LbfgsResult r;
    const std::size_t n = x0.size();
    r.x = std::move(x0);
    r.g.assign(n, 0.0);
    r.f = fg(r.x, r.g);
    r.evaluations = 1;
    if (!std::isfinite(r.f)) throw Error("objective is not finite at the start point");
    if (norm_inf(r.g) <= opt.gradient_tol) {
        r.status = Status::gradient;
        return r;
    }
    std::deque<Vec> S, Y;
    std::deque<double> rho;
    Vec d(n), xn(n), gn(n), q(n);
    constexpr double c1 = 1e-4, c2 = 0.9;
    for (r.iterations = 0; r.iterations < opt.max_iters;) {
        // Two-loop recursion.
        q = r.g;
        std::vector<double> al(S.size());
        for (std::size_t i = S.size(); i-- > 0;) {
            al[i] = rho[i] * dot(S[i], q);
            for (std::size_t j = 0; j < n; ++j) q[j] -= al[i] * Y[i][j];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
        else gamma = opt.initial_step / std::max(norm2(r.g), 1e-300);
        for (std::size_t j = 0; j < n; ++j) q[j] *= gamma;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double b = rho[i] * dot(Y[i], q);
            for (std::size_t j = 0; j < n; ++j) q[j] += S[i][j] * (al[i] - b);
        }
        for (std::size_t j = 0; j < n; ++j) d[j] = -q[j];
        double dg0 = dot(d, r.g);
        if (!(dg0 < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t j = 0; j < n; ++j) d[j] = -r.g[j] / std::max(norm2(r.g), 1e-300);
            dg0 = dot(d, r.g);
        }

        // Strong-Wolfe line search (bracket, then zoom).
        const double f0 = r.f;
        double a_prev = 0.0, f_prev = f0, g_prev = dg0;
        double a = 1.0;
        double a_lo = 0.0, f_lo = f0, g_lo = dg0, a_hi = 0.0, f_hi = 0.0, g_hi = 0.0;
        bool bracketed = false, found = false;
        double fa = 0.0;
        int evals = 0;
        auto trial = [&](double step) {
            for (std::size_t j = 0; j < n; ++j) xn[j] = r.x[j] + step * d[j];
            const double fv = fg(xn, gn);
            ++evals;
            ++r.evaluations;
            return fv;
        };
        while (evals < opt.max_evals_per_search) {
            fa = trial(a);
            const double ga = dot(gn, d);
            if (!std::isfinite(fa) || fa > f0 + c1 * a * dg0 || (evals > 1 && fa >= f_prev)) {
                a_lo = a_prev; f_lo = f_prev; g_lo = g_prev;
                a_hi = a; f_hi = std::isfinite(fa) ? fa : 1e300; g_hi = std::isfinite(ga) ? ga : 0.0;
                bracketed = true;
                break;
            }
            if (std::abs(ga) <= -c2 * dg0) {
                found = true;
                break;
            }
            if (ga >= 0.0) {
                a_lo = a; f_lo = fa; g_lo = ga;
                a_hi = a_prev; f_hi = f_prev; g_hi = g_prev;
                bracketed = true;
                break;
            }
            a_prev = a; f_prev = fa; g_prev = ga;
            a *= 2.0;
        }
        while (bracketed && !found && evals < opt.max_evals_per_search) {
            a = detail::cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi);
            fa = trial(a);
            const double ga = dot(gn, d);
            if (!std::isfinite(fa) || fa > f0 + c1 * a * dg0 || fa >= f_lo) {
                a_hi = a; f_hi = std::isfinite(fa) ? fa : 1e300; g_hi = std::isfinite(ga) ? ga : 0.0;
            } else {
                if (std::abs(ga) <= -c2 * dg0) {
                    found = true;
                    break;
                }
                if (ga * (a_hi - a_lo) >= 0.0) {
                    a_hi = a_lo; f_hi = f_lo; g_hi = g_lo;
                }
                a_lo = a; f_lo = fa; g_lo = ga;
            }
            if (std::abs(a_hi - a_lo) * norm_inf(d) <= 1e-16 * (1.0 + norm_inf(r.x))) break;
        }
        if (!found) {
            // Settle for the best sufficient-decrease point seen, if any.
            if (a_lo > 0.0 && f_lo < f0) {
                a = a_lo;
                fa = trial(a);
            } else {
                r.status = Status::line_search;
                return r;
            }
        }
        ++r.iterations;
        Vec s(n), y(n);
        for (std::size_t j = 0; j < n; ++j) {
            s[j] = xn[j] - r.x[j];
            y[j] = gn[j] - r.g[j];
        }
        const double sy = dot(s, y);
        r.x = xn;
        r.g = gn;
        r.f = fa;
        if (hook) hook(r.x, r.f);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        if (norm_inf(r.g) <= opt.gradient_tol) {
            r.status = Status::gradient;
            return r;
        }
        if (a * norm_inf(d) <= opt.step_tol * (1.0 + norm_inf(r.x))) {
            r.status = Status::step;
            return r;
        }
    }
    r.status = Status::max_iters;
    return r;
}

struct Constraint {
    // c(x) <= 0 with gradient.
    std::function<double(const Vec&, Vec*)> eval;
};

struct AugLagOptions {
    LbfgsOptions inner;
    int max_outer = 40;
    double feas_tol = 1e-9;
    double rho0 = 10.0;
    double rho_growth = 10.0;
    double rho_max = 1e10;
};

struct AugLagResult {
    Vec x;
    double f = 0.0;
    std::vector<double> multipliers;
    double violation = 0.0;
    int iterations = 0;
    int evaluations = 0;
    int outer = 0;
    Status status = Status::max_iters;
};

// PHR augmented Lagrangian:
//   L(x) = f(x) + (1/2 rho) sum_i [max(0, lambda_i + rho c_i(x))^2 - lambda_i^2].
// The inner L-BFGS shares one iteration budget across outer rounds.
inline AugLagResult augmented_lagrangian(const ValueGrad& f, const std::vector<Constraint>& cons, Vec x0,
                                         const AugLagOptions& opt, const IterateHook& hook = {}) {
    AugLagResult out;
    out.x = std::move(x0);
    std::vector<double> lam(cons.size(), 0.0);
    double rho = opt.rho0;
    double prev_viol = std::numeric_limits<double>::infinity();
    Vec gc;
    auto violation = [&](const Vec& x) {
        double v = 0.0;
        for (const auto& c : cons) v = std::max(v, c.eval(x, nullptr));
        return v;
    };
    for (out.outer = 0; out.outer < opt.max_outer; ++out.outer) {
        const ValueGrad L = [&](const Vec& x, Vec& g) {
            double val = f(x, g);
            for (std::size_t i = 0; i < cons.size(); ++i) {
                const double ci = cons[i].eval(x, &gc);
                const double t = std::max(0.0, lam[i] + rho * ci);
                val += (t * t - lam[i] * lam[i]) / (2.0 * rho);
                if (t > 0.0)
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] += t * gc[j];
            }
            return val;
        };
        LbfgsOptions in = opt.inner;
        in.max_iters = std::max(0, opt.inner.max_iters - out.iterations);
        if (in.max_iters == 0) {
            out.status = Status::max_iters;
            break;
        }
        const auto r = lbfgs(L, out.x, in, hook);
        out.iterations += r.iterations;
        out.evaluations += r.evaluations;
        const double step = [&] {
            double m = 0.0;
            for (std::size_t j = 0; j < r.x.size(); ++j) m = std::max(m, std::abs(r.x[j] - out.x[j]));
            return m;
        }();
        out.x = r.x;
        out.status = r.status;
        const double viol = violation(out.x);
        double lam_change = 0.0;
        for (std::size_t i = 0; i < cons.size(); ++i) {
            const double nl = std::max(0.0, lam[i] + rho * cons[i].eval(out.x, nullptr));
            lam_change = std::max(lam_change, std::abs(nl - lam[i]));
            lam[i] = nl;
        }
        out.violation = viol;
        if (viol <= opt.feas_tol &&
            (r.iterations == 0 || step <= opt.inner.step_tol * (1.0 + norm_inf(out.x)) ||
             (r.status == Status::gradient && lam_change <= opt.inner.gradient_tol)))
            break;
        if (r.status == Status::max_iters && out.iterations >= opt.inner.max_iters) break;
        if (viol > 0.25 * prev_viol) rho = std::min(rho * opt.rho_growth, opt.rho_max);
        prev_viol = viol;
    }
    Vec g(out.x.size());
    out.f = f(out.x, g);
    out.multipliers = lam;
    return out;
}

}  // namespace mtsfm::solver
