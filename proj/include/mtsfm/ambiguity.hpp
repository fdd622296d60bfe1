#pragma once

// Narrowband ambiguity function and autocorrelation, evaluated both through
// the GBF double-sum closed forms and by direct correlation of samples, plus
// sidelobe metrics integrated over delay / delay-Doppler regions.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"
#include "mtsfm/gbf.hpp"
#include "mtsfm/quadrature.hpp"
#include "mtsfm/waveform.hpp"

namespace mtsfm {

// |chi(tau, nu)|^2 sampled on a delay-Doppler grid, row-major in tau.
struct AmbiguitySurface {
    std::vector<double> tau_grid;
    std::vector<double> nu_grid;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[i * nu_grid.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * nu_grid.size() + j]; }

    // Riemann volume assuming uniform grids.
    double volume() const {
        if (tau_grid.size() < 2 || nu_grid.size() < 2) return 0.0;
        const double dt = (tau_grid.back() - tau_grid.front()) / static_cast<double>(tau_grid.size() - 1);
        const double dn = (nu_grid.back() - nu_grid.front()) / static_cast<double>(nu_grid.size() - 1);
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc * dt * dn;
    }
};

enum class RegionKind { delay_band, ellipse, annulus };

inline const char* to_string(RegionKind k) {
    switch (k) {
        case RegionKind::delay_band: return "delay_band";
        case RegionKind::ellipse: return "ellipse";
        case RegionKind::annulus: return "annulus";
    }
    return "?";
}

// Region of the delay-Doppler plane in normalized units: delay in T,
// Doppler in 1/T.
struct DelayDopplerRegion {
    RegionKind kind = RegionKind::delay_band;
    // delay_band: tau_lo (unset = start at the first ACF null), tau_hi, and
    // whether the mirror band at negative delay is included. nu_max bounds
    // the band in Doppler when it is used for volume metrics.
    std::optional<double> tau_lo;
    double tau_hi = 1.0;
    bool two_sided = true;
    std::optional<double> nu_max;
    // ellipse: centre and semi-axes. annulus: centred on the origin, between
    // the inner and outer ellipses.
    double tau0 = 0.0, nu0 = 0.0;
    double r_tau = 0.0, r_nu = 0.0;
    double r_tau_inner = 0.0, r_nu_inner = 0.0;

    static DelayDopplerRegion band(std::optional<double> lo, double hi, bool two_sided = true) {
        DelayDopplerRegion r;
        r.kind = RegionKind::delay_band;
        r.tau_lo = lo;
        r.tau_hi = hi;
        r.two_sided = two_sided;
        return r;
    }

    static DelayDopplerRegion ellipse(double tau0, double nu0, double r_tau, double r_nu) {
        DelayDopplerRegion r;
        r.kind = RegionKind::ellipse;
        r.tau0 = tau0;
        r.nu0 = nu0;
        r.r_tau = r_tau;
        r.r_nu = r_nu;
        return r;
    }

    static DelayDopplerRegion annulus(double r_tau_inner, double r_nu_inner, double r_tau, double r_nu) {
        DelayDopplerRegion r;
        r.kind = RegionKind::annulus;
        r.r_tau_inner = r_tau_inner;
        r.r_nu_inner = r_nu_inner;
        r.r_tau = r_tau;
        r.r_nu = r_nu;
        return r;
    }

    void validate() const {
        switch (kind) {
            case RegionKind::delay_band:
                if (tau_lo && *tau_lo < 0.0) throw Error("region: tau_lo must be non-negative");
                if (tau_lo && *tau_lo > tau_hi) throw Error("region: tau_lo exceeds tau_hi");
                if (nu_max && !(*nu_max > 0.0)) throw Error("region: nu_max must be positive");
                break;
            case RegionKind::ellipse:
                if (!(r_tau > 0.0 && r_nu > 0.0)) throw Error("region: ellipse semi-axes must be positive");
                break;
            case RegionKind::annulus:
                if (!(r_tau > 0.0 && r_nu > 0.0)) throw Error("region: annulus outer semi-axes must be positive");
                if (!(r_tau_inner >= 0.0 && r_nu_inner >= 0.0) || r_tau_inner > r_tau || r_nu_inner > r_nu)
                    throw Error("region: annulus inner ellipse must lie inside the outer one");
                break;
        }
    }

    // Membership for normalized coordinates (tau/T, nu*T). Delay bands with an
    // unset lower edge use `tau_m_norm` as that edge.
    bool contains(double tn, double vn, double tau_m_norm = 0.0) const {
        switch (kind) {
            case RegionKind::delay_band: {
                const double lo = tau_lo.value_or(tau_m_norm);
                const double a = two_sided ? std::abs(tn) : tn;
                if (nu_max && std::abs(vn) > *nu_max) return false;
                return a >= lo && a <= tau_hi;
            }
            case RegionKind::ellipse: {
                const double x = (tn - tau0) / r_tau, y = (vn - nu0) / r_nu;
                return x * x + y * y <= 1.0;
            }
            case RegionKind::annulus: {
                const double x = tn / r_tau, y = vn / r_nu;
                if (x * x + y * y > 1.0) return false;
                if (r_tau_inner <= 0.0 || r_nu_inner <= 0.0) return true;
                const double xi = tn / r_tau_inner, yi = vn / r_nu_inner;
                return xi * xi + yi * yi > 1.0;
            }
        }
        return false;
    }

    // Normalized area (tau/T)(nu T); infinite for an unbounded delay band.
    double area(double tau_m_norm = 0.0) const {
        switch (kind) {
            case RegionKind::delay_band: {
                if (!nu_max) return std::numeric_limits<double>::infinity();
                const double width = tau_hi - tau_lo.value_or(tau_m_norm);
                return (two_sided ? 2.0 : 1.0) * width * 2.0 * *nu_max;
            }
            case RegionKind::ellipse: return pi * r_tau * r_nu;
            case RegionKind::annulus: return pi * (r_tau * r_nu - r_tau_inner * r_nu_inner);
        }
        return 0.0;
    }

    // Normalized bounding box {tau_min, tau_max, nu_min, nu_max}.
    std::array<double, 4> bounds(double tau_m_norm = 0.0) const {
        switch (kind) {
            case RegionKind::delay_band: {
                const double lo = tau_lo.value_or(tau_m_norm);
                const double nm = nu_max.value_or(0.0);
                if (two_sided) return {-tau_hi, tau_hi, -nm, nm};
                return {lo, tau_hi, -nm, nm};
            }
            case RegionKind::ellipse: return {tau0 - r_tau, tau0 + r_tau, nu0 - r_nu, nu0 + r_nu};
            case RegionKind::annulus: return {-r_tau, r_tau, -r_nu, r_nu};
        }
        return {0, 0, 0, 0};
    }

    // Hofstetter's necessary condition for a volume-free region.
    bool below_hofstetter_bound(double tau_m_norm = 0.0) const { return area(tau_m_norm) < 4.0; }
};

// Quadrature and truncation settings shared by the sidelobe metrics.
struct QuadConfig {
    double samples_per_res_tau = 10.0;  // per 1/Delta f, sidelobe regions
    double mainlobe_samples_per_res = 64.0;  // per 1/Delta f, inside the first null
    double samples_per_res_nu = 8.0;  // per 1/T
    double null_search_samples_per_res = 20.0;
    double tol = 1e-9;  // GBF Parseval truncation
};

namespace detail {

// Shared O(M^2) kernels. Index i = m + M over m in [-M, M].
struct XY {
    std::vector<double> xr, xi, yr, yi;
    std::vector<cplx> e;
};

// x_m = c_m e_m and y_m = conj(c_m) e_m with e_m = exp(-j pi m u).
inline void prepare_xy(const std::vector<cplx>& c, double u, XY& out) {
    const std::size_t n = c.size();
    const int M = static_cast<int>(n / 2);
    out.xr.resize(n);
    out.xi.resize(n);
    out.yr.resize(n);
    out.yi.resize(n);
    out.e.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = static_cast<double>(static_cast<int>(i) - M);
        const cplx e = std::polar(1.0, -pi * m * u);
        out.e[i] = e;
        const cplx x = c[i] * e;
        const cplx y = std::conj(c[i]) * e;
        out.xr[i] = x.real();
        out.xi[i] = x.imag();
        out.yr[i] = y.real();
        out.yi[i] = y.imag();
    }
}

// z_i = sum_j s[j - i + (n-1)] v_j for a symmetric real Toeplitz kernel s of
// length 2n - 1 (offset n - 1 is lag zero).
inline void toeplitz_sym(const std::vector<double>& s, const std::vector<double>& vr, const std::vector<double>& vi,
                         std::vector<double>& zr, std::vector<double>& zi) {
    const std::size_t n = vr.size();
    zr.assign(n, 0.0);
    zi.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* k = s.data() + (n - 1 - i);
        double ar = 0.0, ai = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            ar += k[j] * vr[j];
            ai += k[j] * vi[j];
        }
        zr[i] = ar;
        zi[i] = ai;
    }
}

// sinc(pi d p) for p in [-(n-1), n-1].
inline void acf_kernel(double d, std::size_t n, std::vector<double>& s) {
    s.resize(2 * n - 1);
    const auto off = static_cast<long long>(n) - 1;
    for (long long p = 0; p <= off; ++p) {
        const double v = sinc(pi * d * static_cast<double>(p));
        s[static_cast<std::size_t>(off + p)] = v;
        s[static_cast<std::size_t>(off - p)] = v;
    }
}

// B_p = sum_j x_{j+p} y_j for p in [-(n-1), n-1], stored at p + n - 1.
inline void cross_correlate(const XY& xy, std::vector<cplx>& B) {
    const std::size_t n = xy.xr.size();
    B.assign(2 * n - 1, cplx{});
    for (std::size_t pi_ = 0; pi_ < 2 * n - 1; ++pi_) {
        const long long p = static_cast<long long>(pi_) - static_cast<long long>(n - 1);
        const std::size_t j0 = p < 0 ? static_cast<std::size_t>(-p) : 0;
        const std::size_t j1 = p < 0 ? n : n - static_cast<std::size_t>(p);
        double br = 0.0, bi = 0.0;
        for (std::size_t j = j0; j < j1; ++j) {
            const std::size_t xj = static_cast<std::size_t>(static_cast<long long>(j) + p);
            br += xy.xr[xj] * xy.yr[j] - xy.xi[xj] * xy.yi[j];
            bi += xy.xr[xj] * xy.yi[j] + xy.xi[xj] * xy.yr[j];
        }
        B[pi_] = {br, bi};
    }
}

}  // namespace detail

// GBF closed forms for one design, with the truncated coefficient set held
// fixed. chi(tau, nu) = d sum_{m,n} c_m c_n^* exp(-j pi (m+n) tau/T)
//                        sinc[pi d (nu T + m - n)] exp(-j pi a0 tau),
// d = (T - |tau|)/T.
class ClosedFormModel {
public:
    explicit ClosedFormModel(const ModulationIndices& idx, double tol = 1e-9)
        : ClosedFormModel(idx, gbf_coefficients_tol(idx.gbf_args(), tol)) {}

    ClosedFormModel(const ModulationIndices& idx, GbfCoefficients coeffs)
        : T_(idx.T), a0_(idx.a0), coeffs_(std::move(coeffs)) {
        idx.validate();
        if (coeffs_.order_min != -coeffs_.order_max) throw Error("closed form needs a symmetric order range");
    }

    double T() const { return T_; }
    const GbfCoefficients& coefficients() const { return coeffs_; }
    int order() const { return coeffs_.order_max; }

    cplx acf(double tau) const {
        if (std::abs(tau) >= T_) return 0.0;
        const double u = tau / T_;
        const double d = 1.0 - std::abs(u);
        detail::XY xy;
        detail::prepare_xy(coeffs_.values, u, xy);
        std::vector<double> s, zr, zi;
        detail::acf_kernel(d, xy.xr.size(), s);
        detail::toeplitz_sym(s, xy.yr, xy.yi, zr, zi);
        double rr = 0.0, ri = 0.0;
        for (std::size_t i = 0; i < zr.size(); ++i) {
            rr += xy.xr[i] * zr[i] - xy.xi[i] * zi[i];
            ri += xy.xr[i] * zi[i] + xy.xi[i] * zr[i];
        }
        return d * cplx(rr, ri) * std::polar(1.0, -pi * a0_ * tau);
    }

    std::vector<cplx> acf(std::span<const double> taus) const {
        std::vector<cplx> out(taus.size());
        for (std::size_t i = 0; i < taus.size(); ++i) out[i] = acf(taus[i]);
        return out;
    }

    // One delay row of the AF: B_p is shared across all Doppler values.
    std::vector<cplx> af_row(double tau, std::span<const double> nus) const {
        std::vector<cplx> out(nus.size());
        if (std::abs(tau) >= T_) return out;
        const double u = tau / T_;
        const double d = 1.0 - std::abs(u);
        detail::XY xy;
        detail::prepare_xy(coeffs_.values, u, xy);
        std::vector<cplx> B;
        detail::cross_correlate(xy, B);
        const auto off = static_cast<long long>(xy.xr.size()) - 1;
        const cplx rot = std::polar(1.0, -pi * a0_ * tau);
        for (std::size_t j = 0; j < nus.size(); ++j) {
            const double v = nus[j] * T_;
            cplx acc = 0.0;
            for (long long p = -off; p <= off; ++p)
                acc += sinc(pi * d * (v + static_cast<double>(p))) * B[static_cast<std::size_t>(p + off)];
            out[j] = d * acc * rot;
        }
        return out;
    }

    cplx af(double tau, double nu) const {
        const double n[1] = {nu};
        return af_row(tau, n)[0];
    }

private:
    double T_;
    double a0_;
    GbfCoefficients coeffs_;
};

inline std::vector<cplx> acf_closed_form(const ModulationIndices& idx, std::span<const double> tau_grid,
                                         double tol = 1e-9) {
    return ClosedFormModel(idx, tol).acf(tau_grid);
}

inline cplx af_closed_form(const ModulationIndices& idx, double tau, double nu, double tol = 1e-9) {
    return ClosedFormModel(idx, tol).af(tau, nu);
}

struct CorrelationOptions {
    // Euler-Maclaurin end corrections on the midpoint sums. Right for smooth
    // envelopes; turn off for piecewise-constant (phase-coded) samples, where
    // the plain sum is already exact.
    bool end_correction = true;
};

// Nearest sample lag for each delay.
inline std::vector<long long> snap_to_lags(const SampledWaveform& w, std::span<const double> tau_grid) {
    std::vector<long long> lags(tau_grid.size());
    for (std::size_t i = 0; i < tau_grid.size(); ++i) lags[i] = std::llround(tau_grid[i] * w.fs);
    return lags;
}

// R(tau) = int s(t) s*(t + tau) dt from the sampled waveform. Delays are
// rounded to the nearest sample lag; all lags come from one FFT correlation.
inline std::vector<cplx> acf_direct(const SampledWaveform& w, std::span<const double> tau_grid,
                                    CorrelationOptions opts = {}) {
    const std::size_t N = w.size();
    const std::size_t L = next_pow2(2 * N);
    std::vector<cplx> buf(L);
    std::copy(w.samples.begin(), w.samples.end(), buf.begin());
    fft::forward(buf);
    for (auto& v : buf) v = std::norm(v);
    fft::inverse(buf);
    const double h = 1.0 / w.fs;
    const double invL = 1.0 / static_cast<double>(L);
    const auto& corr = quad::MidpointEndCorrection::instance();
    const auto lags = snap_to_lags(w, tau_grid);
    std::vector<cplx> out(tau_grid.size());
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const long long l = lags[i];
        const auto al = static_cast<std::size_t>(std::llabs(l));
        if (al >= N) continue;
        // buf[al] / L = sum_n s_{n+al} conj(s_n); R(+al h) is its conjugate.
        cplx r = std::conj(buf[al] * invL);
        if (opts.end_correction) {
            const std::size_t count = N - al;
            r = corr.corrected(r, count, [&](std::size_t n) { return w.samples[n] * std::conj(w.samples[n + al]); });
        }
        r *= h;
        out[i] = l >= 0 ? r : std::conj(r);
    }
    return out;
}

// |chi(tau, nu)|^2 by direct evaluation: for each delay lag the lag product is
// transformed over time. Uniform Doppler grids whose spacing divides the
// sample rate use one FFT per lag; other grids fall back to a direct sum.
inline AmbiguitySurface af_direct(const SampledWaveform& w, std::span<const double> tau_grid,
                                  std::span<const double> nu_grid, CorrelationOptions opts = {}) {
    const std::size_t N = w.size();
    const double h = 1.0 / w.fs;
    const auto lags = snap_to_lags(w, tau_grid);
    AmbiguitySurface surf;
    surf.tau_grid.resize(lags.size());
    for (std::size_t i = 0; i < lags.size(); ++i) surf.tau_grid[i] = static_cast<double>(lags[i]) * h;
    surf.nu_grid.assign(nu_grid.begin(), nu_grid.end());
    const std::size_t Nv = nu_grid.size();
    surf.values.assign(lags.size() * Nv, 0.0);
    if (Nv == 0) return surf;

    // Uniform-grid detection for the FFT path.
    std::size_t fft_len = 0;
    if (Nv >= 2) {
        const double dnu = (nu_grid.back() - nu_grid.front()) / static_cast<double>(Nv - 1);
        bool uniform = dnu > 0.0;
        for (std::size_t j = 1; uniform && j < Nv; ++j)
            uniform = std::abs(nu_grid[j] - nu_grid[0] - dnu * static_cast<double>(j)) <= 1e-9 * std::abs(dnu) * Nv;
        if (uniform) {
            const double Lf = w.fs / dnu;
            const double Lr = std::round(Lf);
            if (std::abs(Lf - Lr) < 1e-6 * Lf && Lr >= static_cast<double>(std::max(N, Nv)))
                fft_len = static_cast<std::size_t>(Lr);
        }
    }

    const auto& corr = quad::MidpointEndCorrection::instance();
    std::vector<cplx> g, buf;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const long long l = lags[i];
        const auto al = static_cast<std::size_t>(std::llabs(l));
        if (al >= N) continue;
        const double tau = static_cast<double>(l) * h;
        // chi = exp(j pi nu tau) h sum_n s_n conj(s_{n+l}) exp(j 2 pi nu t_n)
        const std::size_t n0 = l < 0 ? al : 0;
        const std::size_t count = N - al;
        g.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t n = n0 + k;
            g[k] = w.samples[n] * std::conj(w.samples[static_cast<std::size_t>(static_cast<long long>(n) + l)]);
        }
        const double t_first = w.time(n0);
        auto finish = [&](std::size_t j, cplx sum, double nu) {
            // The end correction assumes a well-resolved integrand; near the
            // Nyquist edge the plain sum is kept.
            if (opts.end_correction && std::abs(nu) * h <= 0.125) {
                sum = corr.corrected(sum, count, [&](std::size_t k) {
                    return g[k] * std::polar(1.0, two_pi * nu * (t_first + static_cast<double>(k) * h));
                });
            }
            const cplx chi = std::polar(h, pi * nu * tau) * sum;
            surf.at(i, j) = std::norm(chi);
        };
        if (fft_len > 0 && count <= fft_len) {
            const double nu0 = nu_grid[0];
            buf.assign(fft_len, cplx{});
            for (std::size_t k = 0; k < count; ++k)
                buf[k] = g[k] * std::polar(1.0, two_pi * nu0 * (t_first + static_cast<double>(k) * h));
            fft::inverse(buf);  // bin q <-> nu0 + q * fs / fft_len, relative to t_first
            const double dnu = w.fs / static_cast<double>(fft_len);
            for (std::size_t j = 0; j < Nv; ++j) {
                const double rel = dnu * static_cast<double>(j);
                finish(j, buf[j] * std::polar(1.0, two_pi * rel * t_first), nu_grid[j]);
            }
        } else {
            for (std::size_t j = 0; j < Nv; ++j) {
                const double nu = nu_grid[j];
                const cplx step = std::polar(1.0, two_pi * nu * h);
                cplx ph = std::polar(1.0, two_pi * nu * t_first);
                cplx sum = 0.0;
                for (std::size_t k = 0; k < count; ++k) {
                    sum += g[k] * ph;
                    ph *= step;
                    if ((k & 255) == 255) ph = std::polar(1.0, two_pi * nu * (t_first + static_cast<double>(k + 1) * h));
                }
                finish(j, sum, nu);
            }
        }
    }
    return surf;
}

// Smallest tau > 0 at a local minimum of |R| lying below -6 dB of the peak,
// refined by a parabola through the neighbouring samples. `tau_grid` must be
// ascending and start at 0. If no interior null exists up to 0.5 T but the
// magnitude decays monotonically to the support edge at T (a bare pulse), the
// edge itself is returned.
inline double first_null(std::span<const cplx> acf, std::span<const double> tau_grid, double T = 1.0) {
    if (acf.size() != tau_grid.size() || acf.size() < 3) throw Error("first_null: need matching grids");
    if (std::abs(tau_grid[0]) > 1e-15) throw Error("first_null: grid must start at zero delay");
    const double peak = std::abs(acf[0]);
    const double thresh = peak * std::pow(10.0, -6.0 / 20.0);
    for (std::size_t i = 1; i + 1 < acf.size(); ++i) {
        if (tau_grid[i] > 0.5 * T) break;
        const double y0 = std::abs(acf[i - 1]), y1 = std::abs(acf[i]), y2 = std::abs(acf[i + 1]);
        if (y1 <= y0 && y1 <= y2 && y1 < thresh) {
            const double den = y0 - 2.0 * y1 + y2;
            double off = den > 0.0 ? 0.5 * (y0 - y2) / den : 0.0;
            off = std::clamp(off, -0.5, 0.5);
            const double step = off >= 0.0 ? tau_grid[i + 1] - tau_grid[i] : tau_grid[i] - tau_grid[i - 1];
            return tau_grid[i] + off * step;
        }
    }
    // Bare-pulse case: monotone decay to zero at the support edge.
    const double last = tau_grid.back();
    if (std::abs(last - T) <= 1e-9 * T && std::abs(acf.back()) <= 1e-9 * peak) {
        bool monotone = true;
        for (std::size_t i = 1; i < acf.size() && monotone; ++i)
            monotone = std::abs(acf[i]) <= std::abs(acf[i - 1]) * (1.0 + 1e-12) + 1e-15;
        if (monotone) return T;
    }
    throw Error("no mainlobe null");
}

inline double resolution_bandwidth(const ModulationIndices& idx) {
    return std::max(swept_bandwidth(idx), 1.0 / idx.T);
}

// First ACF null from the closed form, scanning outward in blocks.
inline double mainlobe_null(const ClosedFormModel& model, double delta_f, const QuadConfig& cfg = {}) {
    const double T = model.T();
    const double h = 1.0 / (cfg.null_search_samples_per_res * delta_f);
    std::vector<double> taus{0.0};
    std::vector<cplx> vals{model.acf(0.0)};
    const double thresh = std::abs(vals[0]) * std::pow(10.0, -6.0 / 20.0);
    std::size_t i = 1;
    while (true) {
        const double t = std::min(h * static_cast<double>(i), T);
        taus.push_back(t);
        vals.push_back(model.acf(t));
        ++i;
        const std::size_t n = vals.size();
        if (n >= 3) {
            const double y0 = std::abs(vals[n - 3]), y1 = std::abs(vals[n - 2]), y2 = std::abs(vals[n - 1]);
            if (y1 <= y0 && y1 <= y2 && y1 < thresh) break;
        }
        if (t >= T) break;
        if (t > 0.5 * T && std::abs(vals.back()) > 0.0) {
            // Keep scanning only while the bare-pulse fallback can still apply.
            if (std::abs(vals.back()) > std::abs(vals[vals.size() - 2]) * (1.0 + 1e-12)) break;
        }
    }
    return first_null(vals, taus, T);
}

inline double mainlobe_null(const ModulationIndices& idx, const QuadConfig& cfg = {}) {
    return mainlobe_null(ClosedFormModel(idx, cfg.tol), resolution_bandwidth(idx), cfg);
}

// Uniform nodes from lo to hi with spacing at most h (at least two nodes).
inline std::vector<double> uniform_nodes(double lo, double hi, double h) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / h))) + 1;
    return linspace(lo, hi, n);
}

struct IsrParts {
    double sidelobe_area = 0.0;  // int over the region of |R|^2
    double mainlobe_area = 0.0;  // int over (-tau_m, tau_m) of |R|^2
    double tau_m = 0.0;
    double ratio() const { return mainlobe_area > 0.0 ? sidelobe_area / mainlobe_area : 0.0; }
    double db() const { return db10(ratio()); }
};

// Delay nodes and trapezoid weights for the two ISR integrals, on tau >= 0.
// Both-sided regions fold onto positive delay through |R(-tau)| = |R(tau)|.
struct IsrGrid {
    std::vector<double> side_tau, side_w;
    std::vector<double> main_tau, main_w;
};

inline IsrGrid make_isr_grid(const DelayDopplerRegion& region, double T, double delta_f, double tau_m,
                             const QuadConfig& cfg) {
    if (region.kind != RegionKind::delay_band) throw Error("isr needs a delay_band region");
    region.validate();
    const double lo = region.tau_lo ? *region.tau_lo * T : tau_m;
    const double hi = std::min(region.tau_hi * T, T);
    if (lo < tau_m * (1.0 - 1e-9)) throw Error("region overlaps the mainlobe");
    IsrGrid g;
    const double fold = region.two_sided ? 2.0 : 1.0;
    if (hi > lo) {
        g.side_tau = uniform_nodes(lo, hi, 1.0 / (cfg.samples_per_res_tau * delta_f));
        g.side_w = trapezoid_weights(g.side_tau.size(), g.side_tau[1] - g.side_tau[0]);
        for (auto& w : g.side_w) w *= fold;
    }
    g.main_tau = uniform_nodes(0.0, tau_m, 1.0 / (cfg.mainlobe_samples_per_res * delta_f));
    g.main_w = trapezoid_weights(g.main_tau.size(), g.main_tau[1] - g.main_tau[0]);
    for (auto& w : g.main_w) w *= 2.0;
    return g;
}

inline IsrParts isr_parts(const ClosedFormModel& model, const IsrGrid& g, double tau_m) {
    IsrParts p;
    p.tau_m = tau_m;
    for (std::size_t i = 0; i < g.side_tau.size(); ++i) p.sidelobe_area += g.side_w[i] * std::norm(model.acf(g.side_tau[i]));
    for (std::size_t i = 0; i < g.main_tau.size(); ++i) p.mainlobe_area += g.main_w[i] * std::norm(model.acf(g.main_tau[i]));
    return p;
}

// ACF integrated sidelobe ratio over a delay band, from the closed form.
inline IsrParts isr_detail(const ModulationIndices& idx, const DelayDopplerRegion& region, const QuadConfig& cfg = {}) {
    const ClosedFormModel model(idx, cfg.tol);
    const double df = resolution_bandwidth(idx);
    const double tau_m = mainlobe_null(model, df, cfg);
    return isr_parts(model, make_isr_grid(region, idx.T, df, tau_m, cfg), tau_m);
}

inline double isr(const ModulationIndices& idx, const DelayDopplerRegion& region, const QuadConfig& cfg = {}) {
    return isr_detail(idx, region, cfg).db();
}

// The same ratio from sampled data (any taper, phase codes included): the
// direct ACF on every sample lag, trapezoid in delay, nulls from the samples.
inline IsrParts isr_sampled(const SampledWaveform& w, const DelayDopplerRegion& region, CorrelationOptions opts = {}) {
    if (region.kind != RegionKind::delay_band) throw Error("isr needs a delay_band region");
    region.validate();
    const std::size_t N = w.size();
    std::vector<double> taus(N);
    for (std::size_t l = 0; l < N; ++l) taus[l] = static_cast<double>(l) / w.fs;
    taus.push_back(w.T);
    auto R = acf_direct(w, std::span<const double>(taus.data(), N), opts);
    R.push_back(0.0);
    const double tau_m = first_null(R, taus, w.T);
    const double lo = region.tau_lo ? *region.tau_lo * w.T : tau_m;
    const double hi = std::min(region.tau_hi * w.T, w.T);
    if (lo < tau_m * (1.0 - 1e-9)) throw Error("region overlaps the mainlobe");
    // Piecewise-linear |R|^2 between lags, integrated exactly on [a, b].
    auto integrate = [&](double a, double b) {
        if (b <= a) return 0.0;
        double acc = 0.0;
        const double h = 1.0 / w.fs;
        auto value = [&](double t) {
            const double x = t / h;
            auto k = static_cast<std::size_t>(std::floor(x));
            if (k + 1 >= taus.size()) return std::norm(R.back());
            const double f = x - static_cast<double>(k);
            return (1.0 - f) * std::norm(R[k]) + f * std::norm(R[k + 1]);
        };
        const double ka = std::ceil(a / h), kb = std::floor(b / h);
        if (kb < ka) return 0.5 * (b - a) * (value(a) + value(b));
        acc += 0.5 * (ka * h - a) * (value(a) + value(ka * h));
        for (double k = ka; k < kb; k += 1.0) acc += 0.5 * h * (value(k * h) + value((k + 1.0) * h));
        acc += 0.5 * (b - kb * h) * (value(kb * h) + value(b));
        return acc;
    };
    IsrParts p;
    p.tau_m = tau_m;
    p.mainlobe_area = 2.0 * integrate(0.0, tau_m);
    p.sidelobe_area = (region.two_sided ? 2.0 : 1.0) * integrate(lo, hi);
    return p;
}

// Delay-Doppler nodes (absolute units) and weights for a region volume, with
// the mainlobe ellipse |tau/tau_m|^2 + |nu T|^2 <= 1 removed when asked.
struct VolumeGrid {
    struct Row {
        double tau;
        std::vector<double> nu;
        std::vector<double> w;
    };
    std::vector<Row> rows;
    double area_norm = 0.0;
};

inline VolumeGrid make_volume_grid(const DelayDopplerRegion& region, double T, double delta_f, double tau_m,
                                   const QuadConfig& cfg, bool exclude_mainlobe = true) {
    region.validate();
    if (region.kind == RegionKind::delay_band && !region.nu_max)
        throw Error("delay_band volume needs a Doppler extent (nu_max)");
    const double tmn = tau_m / T;
    auto [t_lo, t_hi, v_lo, v_hi] = region.bounds(tmn);
    t_lo = std::max(t_lo, -1.0);
    t_hi = std::min(t_hi, 1.0);
    VolumeGrid g;
    g.area_norm = region.area(tmn);
    if (t_hi <= t_lo) return g;
    // Nodes on the lattice k * h so symmetric regions sample symmetrically.
    const double ht = 1.0 / (cfg.samples_per_res_tau * delta_f * T);  // normalized
    const double hv = 1.0 / cfg.samples_per_res_nu;
    const auto k0 = static_cast<long long>(std::ceil(t_lo / ht - 1e-9));
    const auto k1 = static_cast<long long>(std::floor(t_hi / ht + 1e-9));
    const auto j0 = static_cast<long long>(std::ceil(v_lo / hv - 1e-9));
    const auto j1 = static_cast<long long>(std::floor(v_hi / hv + 1e-9));
    for (long long k = k0; k <= k1; ++k) {
        const double tn = static_cast<double>(k) * ht;
        if (std::abs(tn) >= 1.0) continue;
        VolumeGrid::Row row;
        row.tau = tn * T;
        for (long long j = j0; j <= j1; ++j) {
            const double vn = static_cast<double>(j) * hv;
            if (!region.contains(tn, vn, tmn)) continue;
            if (exclude_mainlobe) {
                const double a = tmn > 0.0 ? tn / tmn : 0.0;
                if (a * a + vn * vn <= 1.0) continue;
            }
            row.nu.push_back(vn / T);
            row.w.push_back(ht * T * hv / T);
        }
        if (!row.nu.empty()) g.rows.push_back(std::move(row));
    }
    return g;
}

inline double volume_on_grid(const ClosedFormModel& model, const VolumeGrid& g) {
    double acc = 0.0;
    for (const auto& row : g.rows) {
        const auto chi = model.af_row(row.tau, row.nu);
        for (std::size_t j = 0; j < chi.size(); ++j) acc += row.w[j] * std::norm(chi[j]);
    }
    return acc;
}

struct VolumeResult {
    double volume = 0.0;
    double area = 0.0;
    bool hofstetter_ok = true;
    double tau_m = 0.0;
};

// int int over the region of |chi|^2 from the closed form.
inline VolumeResult af_region_volume_detail(const ModulationIndices& idx, const DelayDopplerRegion& region,
                                            const QuadConfig& cfg = {}, bool exclude_mainlobe = true) {
    const ClosedFormModel model(idx, cfg.tol);
    const double df = resolution_bandwidth(idx);
    const double tau_m = mainlobe_null(model, df, cfg);
    const auto grid = make_volume_grid(region, idx.T, df, tau_m, cfg, exclude_mainlobe);
    VolumeResult r;
    r.tau_m = tau_m;
    r.area = grid.area_norm;
    r.hofstetter_ok = grid.area_norm < 4.0;
    bool any = false;
    for (const auto& row : grid.rows) any = any || !row.nu.empty();
    const auto [t_lo, t_hi, v_lo, v_hi] = region.bounds(tau_m / idx.T);
    if (!any && t_lo < 1.0 && t_hi > -1.0 && !(region.area(tau_m / idx.T) > 0.0)) throw Error("empty region");
    r.volume = volume_on_grid(model, grid);
    return r;
}

inline double af_region_volume(const ModulationIndices& idx, const DelayDopplerRegion& region,
                               const QuadConfig& cfg = {}) {
    return af_region_volume_detail(idx, region, cfg).volume;
}

}  // namespace mtsfm
