#pragma once

// Quadrature-discretized sidelobe objectives over the free modulation
// indices, with analytic gradients through the GBF partials.
//
// Every objective is a function of sums S_g = sum w |chi(tau, nu)|^2 over
// frozen node groups. Nodes sharing a delay form a row; per row the
// correlation B_p = sum_n x_{n+p} y_n (x_m = c_m e_m, y_m = c_m^* e_m,
// e_m = exp(-j pi m tau/T)) is formed by FFT and
//   chi(tau, nu) = d sum_p sinc[pi d (nu T + p)] B_p,   d = 1 - |tau|/T.

#include <cstdint>
#include <map>
#include <thread>
#include <vector>

#include "mtsfm/ambiguity.hpp"
#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"
#include "mtsfm/gbf.hpp"
#include "mtsfm/waveform.hpp"

namespace mtsfm {

enum class ObjectiveKind { isr, af_volume, acf_area };

inline const char* to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::isr: return "isr";
        case ObjectiveKind::af_volume: return "af_volume";
        case ObjectiveKind::acf_area: return "acf_area";
    }
    return "?";
}

inline ObjectiveKind parse_objective(const std::string& s) {
    if (s == "isr") return ObjectiveKind::isr;
    if (s == "af_volume") return ObjectiveKind::af_volume;
    if (s == "acf_area") return ObjectiveKind::acf_area;
    throw Error("unknown objective '" + s + "'");
}

struct StopConfig {
    int max_iters = 500;
    double gradient_tol = 1e-6;
    double step_tol = 1e-10;
    double initial_step = 1.0;
};

struct OptimizeProblem {
    ObjectiveKind objective = ObjectiveKind::isr;
    DelayDopplerRegion region = DelayDopplerRegion::band(std::nullopt, 0.2);
    double delta = 0.2;
    bool rms_constraint = true;
    Symmetry free_set = Symmetry::even;
    QuadConfig quad;
    StopConfig stop;
    // Coefficient orders kept during a run, as a multiple of the start's
    // truncation order (the corridor lets the bandwidth grow by sqrt(1 + delta)).
    double order_margin = 1.25;
    // Tiny seeded perturbation of free coordinates that start exactly at zero.
    bool perturb_zero_coordinates = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate(const ModulationIndices& idx) const {
        idx.validate();
        if (!(delta >= 0.0 && delta < 1.0)) throw Error("delta must lie in [0, 1)");
        if (!(order_margin >= 1.0)) throw Error("order margin must be at least 1");
        if (stop.max_iters < 0) throw Error("max_iters must be non-negative");
        region.validate();
        if (objective == ObjectiveKind::isr && region.kind != RegionKind::delay_band)
            throw Error("isr objective needs a delay_band region");
        const bool has_alpha = std::any_of(idx.alphas.begin(), idx.alphas.end(), [](double v) { return v != 0.0; });
        const bool has_beta = std::any_of(idx.betas.begin(), idx.betas.end(), [](double v) { return v != 0.0; });
        if (free_set == Symmetry::even && has_beta) throw Error("free set 'even' but the start has nonzero betas");
        if (free_set == Symmetry::odd && has_alpha) throw Error("free set 'odd' but the start has nonzero alphas");
    }
};

// sum_k k^2 (alpha_k^2 + beta_k^2); proportional to the RMS bandwidth.
inline double rms_moment(const ModulationIndices& idx) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= idx.K(); ++k) {
        const double kk = static_cast<double>(k * k);
        acc += kk * (idx.alphas[k - 1] * idx.alphas[k - 1] + idx.betas[k - 1] * idx.betas[k - 1]);
    }
    return acc;
}

// One compiled objective: nodes, truncation order and tau_m are fixed at
// construction from the start design.
class DesignObjective {
public:
    DesignObjective(const ModulationIndices& idx0, const OptimizeProblem& prob)
        : base_(idx0), prob_(prob) {
        prob.validate(idx0);
        T_ = idx0.T;
        K_ = idx0.K();
        const GbfArgs args = idx0.gbf_args();
        const int M0 = truncation_order(args, prob.quad.tol);
        M_ = static_cast<int>(std::ceil(prob.order_margin * M0)) + 2;
        n_ = 2 * static_cast<std::size_t>(M_) + 1;
        L_ = next_pow2(2 * n_);
        delta_f_ = resolution_bandwidth(idx0);
        tau_m_ = mainlobe_null(ClosedFormModel(idx0, prob.quad.tol), delta_f_, prob.quad);
        q0_ = rms_moment(idx0);
        build_nodes();
    }

    std::size_t dimension() const {
        return prob_.free_set == Symmetry::full ? 2 * K_ : K_;
    }
    int order() const { return M_; }
    double tau_m() const { return tau_m_; }
    double delta_f() const { return delta_f_; }
    double reference_moment() const { return q0_; }
    std::size_t node_count() const {
        std::size_t c = 0;
        for (const auto& r : rows_) c += r.nu.size();
        return c;
    }
    const OptimizeProblem& problem() const { return prob_; }

    std::vector<double> pack(const ModulationIndices& idx) const {
        std::vector<double> x;
        x.reserve(dimension());
        if (prob_.free_set != Symmetry::odd) x.insert(x.end(), idx.alphas.begin(), idx.alphas.end());
        if (prob_.free_set != Symmetry::even) x.insert(x.end(), idx.betas.begin(), idx.betas.end());
        return x;
    }

    ModulationIndices unpack(std::span<const double> x) const {
        if (x.size() != dimension()) throw Error("parameter vector has the wrong length");
        ModulationIndices idx = base_;
        std::size_t o = 0;
        if (prob_.free_set != Symmetry::odd) {
            std::copy(x.begin(), x.begin() + static_cast<long>(K_), idx.alphas.begin());
            o = K_;
        }
        if (prob_.free_set != Symmetry::even)
            std::copy(x.begin() + static_cast<long>(o), x.begin() + static_cast<long>(o + K_), idx.betas.begin());
        return idx;
    }

    // Corridor ratio beta_rms^2 / reference and its gradient.
    double rms_ratio(std::span<const double> x, std::vector<double>* grad = nullptr) const {
        const auto idx = unpack(x);
        if (grad) {
            grad->assign(dimension(), 0.0);
            std::size_t o = 0;
            if (prob_.free_set != Symmetry::odd) {
                for (std::size_t k = 1; k <= K_; ++k) (*grad)[k - 1] = 2.0 * static_cast<double>(k * k) * x[k - 1] / q0_;
                o = K_;
            }
            if (prob_.free_set != Symmetry::even)
                for (std::size_t k = 1; k <= K_; ++k)
                    (*grad)[o + k - 1] = 2.0 * static_cast<double>(k * k) * x[o + k - 1] / q0_;
        }
        return rms_moment(idx) / q0_;
    }

    double value(std::span<const double> x) const { return evaluate(x, nullptr); }

    double value_grad(std::span<const double> x, std::vector<double>& grad) const { return evaluate(x, &grad); }

    double value(const ModulationIndices& idx) const { return value(pack(idx)); }

    // Raw group sums for a design (numerator, denominator).
    std::array<double, 2> group_sums(std::span<const double> x) const {
        std::array<double, 2> s{};
        accumulate(x, nullptr, s, nullptr);
        return s;
    }

private:
    struct Row {
        double tau = 0.0;
        double d = 0.0;
        std::vector<double> nu;  // nu T
        std::vector<double> w;
        std::vector<int> group;
        std::vector<double> sp, cp;  // sin, cos of pi d p, p in [-(n-1), n-1]
    };

    struct Work {
        std::vector<cplx> e, x, y, X, Yc, B, A, t1, t2;
        std::vector<double> kern;
        std::array<std::vector<cplx>, 2> a;
    };

    void add_node(std::map<long long, Row>& rows, long long key, double tau, double nuT, double w, int group) {
        auto& r = rows[key];
        r.tau = tau;
        r.nu.push_back(nuT);
        r.w.push_back(w);
        r.group.push_back(group);
    }

    void build_nodes() {
        std::map<long long, Row> rows;
        const auto& q = prob_.quad;
        switch (prob_.objective) {
            case ObjectiveKind::isr: {
                const auto g = make_isr_grid(prob_.region, T_, delta_f_, tau_m_, q);
                long long key = 0;
                for (std::size_t i = 0; i < g.side_tau.size(); ++i)
                    add_node(rows, key++, g.side_tau[i], 0.0, g.side_w[i], 0);
                for (std::size_t i = 0; i < g.main_tau.size(); ++i)
                    add_node(rows, key++, g.main_tau[i], 0.0, g.main_w[i], 1);
                break;
            }
            case ObjectiveKind::acf_area: {
                const auto taus = uniform_nodes(0.0, T_, 1.0 / (q.samples_per_res_tau * delta_f_));
                const auto w = trapezoid_weights(taus.size(), taus[1] - taus[0]);
                for (std::size_t i = 0; i + 1 < taus.size(); ++i) add_node(rows, static_cast<long long>(i), taus[i], 0.0, 2.0 * w[i], 0);
                break;
            }
            case ObjectiveKind::af_volume: {
                const auto g = make_volume_grid(prob_.region, T_, delta_f_, tau_m_, q, true);
                const double ht = 1.0 / (q.samples_per_res_tau * delta_f_);
                // |chi(-tau, -nu)| = |chi(tau, nu)|: negative-delay rows fold
                // onto the matching positive-delay row.
                for (const auto& r : g.rows) {
                    const long long k = std::llround(r.tau / ht);
                    const double sgn = k < 0 ? -1.0 : 1.0;
                    for (std::size_t j = 0; j < r.nu.size(); ++j)
                        add_node(rows, std::llabs(k), std::abs(r.tau), sgn * r.nu[j] * T_, r.w[j], 0);
                }
                break;
            }
        }
        const auto off = static_cast<long long>(n_) - 1;
        for (auto& [key, r] : rows) {
            if (std::abs(r.tau) >= T_) continue;
            r.d = 1.0 - std::abs(r.tau) / T_;
            r.sp.resize(2 * n_ - 1);
            r.cp.resize(2 * n_ - 1);
            for (long long p = -off; p <= off; ++p) {
                const double ang = pi * r.d * static_cast<double>(p);
                r.sp[static_cast<std::size_t>(p + off)] = std::sin(ang);
                r.cp[static_cast<std::size_t>(p + off)] = std::cos(ang);
            }
            rows_.push_back(std::move(r));
        }
    }

    // Per-row contribution to the group sums and, optionally, to the
    // conjugate-gradient vectors dS_g / dc_m^*.
    void row_pass(const Row& r, const std::vector<cplx>& c, Work& wk, std::array<double, 2>& S,
                  std::array<std::vector<cplx>, 2>* G) const {
        const std::size_t n = n_, L = L_;
        const auto off = static_cast<long long>(n) - 1;
        const double u = r.tau / T_;
        wk.e.resize(n);
        wk.X.assign(L, cplx{});
        wk.Yc.assign(L, cplx{});
        for (std::size_t i = 0; i < n; ++i) {
            const double m = static_cast<double>(static_cast<long long>(i) - M_);
            const cplx e = std::polar(1.0, -pi * m * u);
            wk.e[i] = e;
            wk.X[i] = c[i] * e;
            wk.Yc[i] = std::conj(c[i]) * e;
        }
        if (G) {
            wk.x.assign(wk.X.begin(), wk.X.begin() + static_cast<long>(n));
            wk.y.assign(wk.Yc.begin(), wk.Yc.begin() + static_cast<long>(n));
        }
        fft::forward(wk.X);   // F(x)
        fft::inverse(wk.Yc);  // F^-(y)
        wk.B.resize(L);
        const double invL = 1.0 / static_cast<double>(L);
        for (std::size_t k = 0; k < L; ++k) wk.B[k] = wk.X[k] * wk.Yc[k];
        fft::inverse(wk.B);
        // Linear layout: Bl[p + off] = B_p.
        wk.t1.resize(2 * n - 1);
        for (long long p = -off; p <= off; ++p)
            wk.t1[static_cast<std::size_t>(p + off)] = wk.B[static_cast<std::size_t>((p + static_cast<long long>(L)) % static_cast<long long>(L))] * invL;
        const auto& Bl = wk.t1;

        bool used[2] = {false, false};
        if (G)
            for (int g = 0; g < 2; ++g) wk.a[static_cast<std::size_t>(g)].assign(2 * n - 1, cplx{});
        wk.kern.resize(2 * n - 1);
        for (std::size_t j = 0; j < r.nu.size(); ++j) {
            const double v = r.nu[j];
            const double sv = std::sin(pi * r.d * v), cv = std::cos(pi * r.d * v);
            double cr = 0.0, ci = 0.0;
            for (std::size_t q = 0; q < 2 * n - 1; ++q) {
                const double arg = pi * r.d * (v + static_cast<double>(static_cast<long long>(q) - off));
                const double s = sv * r.cp[q] + cv * r.sp[q];
                const double kq = std::abs(arg) < 1e-8 ? 1.0 - arg * arg / 6.0 : s / arg;
                wk.kern[q] = kq;
                cr += kq * Bl[q].real();
                ci += kq * Bl[q].imag();
            }
            const cplx chi = r.d * cplx(cr, ci);
            const int g = r.group[j];
            S[static_cast<std::size_t>(g)] += r.w[j] * std::norm(chi);
            if (G) {
                used[g] = true;
                const cplx coef = r.w[j] * r.d * std::conj(chi);
                auto& a = wk.a[static_cast<std::size_t>(g)];
                for (std::size_t q = 0; q < 2 * n - 1; ++q) a[q] += coef * wk.kern[q];
            }
        }
        if (!G) return;
        // dS/dc_j^* = e_j sum_p a_p x_{j+p} + conj(e_j sum_p a_p y_{j-p})
        for (int g = 0; g < 2; ++g) {
            if (!used[g]) continue;
            const auto& a = wk.a[static_cast<std::size_t>(g)];
            wk.A.assign(L, cplx{});
            for (long long p = -off; p <= off; ++p)
                wk.A[static_cast<std::size_t>((p + static_cast<long long>(L)) % static_cast<long long>(L))] = a[static_cast<std::size_t>(p + off)];
            fft::forward(wk.A);  // F(a)
            wk.t2.resize(L);
            std::vector<cplx>& U = wk.t2;
            std::vector<cplx> V(L);
            for (std::size_t k = 0; k < L; ++k) {
                const std::size_t nk = (L - k) % L;
                U[k] = wk.X[k] * wk.A[nk];    // F(x) F^-(a)
                V[k] = wk.A[k] * wk.Yc[nk];   // F(a) F(y)
            }
            fft::inverse(U);
            fft::inverse(V);
            auto& Gg = (*G)[static_cast<std::size_t>(g)];
            for (std::size_t i = 0; i < n; ++i)
                Gg[i] += wk.e[i] * U[i] * invL + std::conj(wk.e[i] * V[i] * invL);
        }
    }

    // Coefficients on |m| <= M + K (margin for the partials).
    GbfCoefficients coefficients(const ModulationIndices& idx) const {
        return gbf_coefficients(idx.gbf_args(), M_ + static_cast<int>(K_));
    }

    void accumulate(std::span<const double> x, const GbfCoefficients* pre, std::array<double, 2>& S,
                    std::array<std::vector<cplx>, 2>* G, GbfCoefficients* out_coeffs = nullptr) const {
        const auto idx = unpack(x);
        GbfCoefficients full = pre ? *pre : coefficients(idx);
        std::vector<cplx> c(n_);
        for (int m = -M_; m <= M_; ++m) c[static_cast<std::size_t>(m + M_)] = full[m];
        // Fixed chunking, reduced in order: identical sums for any thread count.
        const std::size_t R = rows_.size();
        const std::size_t chunks = std::min<std::size_t>(R, 64);
        std::vector<std::array<double, 2>> cs(chunks, {0.0, 0.0});
        std::vector<std::array<std::vector<cplx>, 2>> cg(G ? chunks : 0);
        auto run = [&](std::size_t ch) {
            Work wk;
            const std::size_t lo = ch * R / chunks, hi = (ch + 1) * R / chunks;
            std::array<std::vector<cplx>, 2>* gp = nullptr;
            if (G) {
                cg[ch][0].assign(n_, cplx{});
                cg[ch][1].assign(n_, cplx{});
                gp = &cg[ch];
            }
            for (std::size_t i = lo; i < hi; ++i) row_pass(rows_[i], c, wk, cs[ch], gp);
        };
        const unsigned nt = std::max(1u, std::min<unsigned>(prob_.threads, static_cast<unsigned>(chunks)));
        if (nt <= 1) {
            for (std::size_t ch = 0; ch < chunks; ++ch) run(ch);
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < nt; ++t)
                pool.emplace_back([&, t] {
                    for (std::size_t ch = t; ch < chunks; ch += nt) run(ch);
                });
            for (auto& th : pool) th.join();
        }
        S = {0.0, 0.0};
        if (G) {
            (*G)[0].assign(n_, cplx{});
            (*G)[1].assign(n_, cplx{});
        }
        for (std::size_t ch = 0; ch < chunks; ++ch) {
            S[0] += cs[ch][0];
            S[1] += cs[ch][1];
            if (G)
                for (int g = 0; g < 2; ++g)
                    for (std::size_t i = 0; i < n_; ++i) (*G)[static_cast<std::size_t>(g)][i] += cg[ch][static_cast<std::size_t>(g)][i];
        }
        if (out_coeffs) *out_coeffs = std::move(full);
    }

    double evaluate(std::span<const double> x, std::vector<double>* grad) const {
        std::array<double, 2> S{};
        std::array<std::vector<cplx>, 2> G;
        GbfCoefficients full;
        accumulate(x, nullptr, S, grad ? &G : nullptr, &full);
        double f = S[0];
        double dS[2] = {1.0, 0.0};
        if (prob_.objective == ObjectiveKind::isr) {
            if (!(S[1] > 0.0)) throw Error("isr: zero mainlobe energy");
            f = S[0] / S[1];
            dS[0] = 1.0 / S[1];
            dS[1] = -S[0] / (S[1] * S[1]);
        }
        if (!grad) return f;
        std::vector<cplx> Gc(n_);
        for (std::size_t i = 0; i < n_; ++i) Gc[i] = dS[0] * G[0][i] + dS[1] * G[1][i];
        grad->assign(dimension(), 0.0);
        std::size_t o = 0;
        for (int pass = 0; pass < 2; ++pass) {
            const bool alpha = pass == 0;
            if (alpha && prob_.free_set == Symmetry::odd) continue;
            if (!alpha && prob_.free_set == Symmetry::even) continue;
            for (std::size_t k = 1; k <= K_; ++k) {
                const int kk = static_cast<int>(k);
                cplx acc = 0.0;
                for (int m = -M_; m <= M_; ++m) {
                    const cplx gc = std::conj(Gc[static_cast<std::size_t>(m + M_)]);
                    acc += alpha ? gc * (full[m - kk] - full[m + kk]) : gc * (full[m - kk] + full[m + kk]);
                }
                (*grad)[o + k - 1] = alpha ? acc.real() : acc.imag();
            }
            o += K_;
        }
        return f;
    }

    ModulationIndices base_;
    OptimizeProblem prob_;
    double T_ = 1.0;
    std::size_t K_ = 0;
    int M_ = 0;
    std::size_t n_ = 0, L_ = 0;
    double delta_f_ = 0.0, tau_m_ = 0.0, q0_ = 0.0;
    std::vector<Row> rows_;
};

// Gradient of the discretized objective at idx (nodes frozen at idx).
inline std::vector<double> objective_gradient(const ModulationIndices& idx, const OptimizeProblem& prob) {
    const DesignObjective obj(idx, prob);
    std::vector<double> g;
    obj.value_grad(obj.pack(idx), g);
    return g;
}

}  // namespace mtsfm
