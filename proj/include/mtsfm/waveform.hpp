#pragma once

// MTSFM design vectors, sampled synthesis, and time/frequency quality metrics.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"
#include "mtsfm/gbf.hpp"

namespace mtsfm {

// Which Fourier set of the modulation function is populated (or free).
enum class Symmetry { even, odd, full };

inline const char* to_string(Symmetry s) {
    switch (s) {
        case Symmetry::even: return "even";
        case Symmetry::odd: return "odd";
        case Symmetry::full: return "full";
    }
    return "?";
}

inline Symmetry parse_symmetry(const std::string& s) {
    if (s == "even") return Symmetry::even;
    if (s == "odd") return Symmetry::odd;
    if (s == "full") return Symmetry::full;
    throw Error("unknown symmetry '" + s + "'");
}

// Modulation function m(t) = a0/2 + sum_k a_k cos(2 pi k t/T) + b_k sin(2 pi k t/T),
// stored through the unitless indices alpha_k = a_k T/k and beta_k = b_k T/k.
struct ModulationIndices {
    double a0 = 0.0;
    std::vector<double> alphas;
    std::vector<double> betas;
    double T = 1.0;

    static ModulationIndices even(std::vector<double> alphas, double T = 1.0) {
        ModulationIndices idx{0.0, std::move(alphas), {}, T};
        idx.betas.assign(idx.alphas.size(), 0.0);
        return idx;
    }

    static ModulationIndices odd(std::vector<double> betas, double T = 1.0) {
        ModulationIndices idx{0.0, {}, std::move(betas), T};
        idx.alphas.assign(idx.betas.size(), 0.0);
        return idx;
    }

    std::size_t K() const { return alphas.size(); }

    void validate() const {
        if (alphas.empty()) throw Error("indices: K must be at least 1");
        if (alphas.size() != betas.size()) throw Error("indices: alphas and betas differ in length");
        if (!(T > 0.0) || !std::isfinite(T)) throw Error("indices: pulse length must be positive");
        if (!std::isfinite(a0)) throw Error("indices: non-finite a0");
        for (std::size_t k = 0; k < K(); ++k)
            if (!std::isfinite(alphas[k]) || !std::isfinite(betas[k])) throw Error("indices: non-finite entry");
    }

    // Fourier coefficients of m(t), k = 1..K.
    double a(std::size_t k) const { return alphas.at(k - 1) * static_cast<double>(k) / T; }
    double b(std::size_t k) const { return betas.at(k - 1) * static_cast<double>(k) / T; }

    bool is_zero() const {
        return std::all_of(alphas.begin(), alphas.end(), [](double v) { return v == 0.0; }) &&
               std::all_of(betas.begin(), betas.end(), [](double v) { return v == 0.0; });
    }

    GbfArgs gbf_args() const { return GbfArgs::from(alphas, betas); }

    // phi(t) = pi a0 t + sum_k alpha_k sin(2 pi k t/T) - beta_k cos(2 pi k t/T)
    double phase(double t) const {
        return pi * a0 * t + gbf_args_phase(two_pi * t / T);
    }

    double modulation(double t) const {
        double acc = 0.5 * a0;
        const double w = two_pi * t / T;
        for (std::size_t k = 1; k <= K(); ++k) {
            const double kw = static_cast<double>(k) * w;
            acc += a(k) * std::cos(kw) + b(k) * std::sin(kw);
        }
        return acc;
    }

    // Zero-pads both sets to K harmonics (no-op when already that long).
    ModulationIndices padded(std::size_t K_new) const {
        ModulationIndices out = *this;
        if (K_new > K()) {
            out.alphas.resize(K_new, 0.0);
            out.betas.resize(K_new, 0.0);
        }
        return out;
    }

private:
    double gbf_args_phase(double theta) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < K(); ++k) {
            const double kt = static_cast<double>(k + 1) * theta;
            acc += alphas[k] * std::sin(kt) - betas[k] * std::cos(kt);
        }
        return acc;
    }
};

enum class TaperKind { rectangular, tukey };

struct TaperSpec {
    TaperKind kind = TaperKind::rectangular;
    double alpha_T = 0.0;

    static TaperSpec rectangular() { return {}; }
    static TaperSpec tukey(double a) {
        if (!(a >= 0.0 && a <= 1.0)) throw Error("tukey shape parameter must lie in [0, 1]");
        return {TaperKind::tukey, a};
    }

    // Amplitude at fractional position x in [0, 1] across the pulse. The
    // cosine lobes cover alpha_T/2 of each edge (Hann at alpha_T = 1).
    double value(double x) const {
        if (kind == TaperKind::rectangular || alpha_T <= 0.0) return 1.0;
        const double edge = 0.5 * alpha_T;
        if (x < edge) return 0.5 * (1.0 + std::cos(pi * (x - edge) / edge));
        if (x > 1.0 - edge) return 0.5 * (1.0 + std::cos(pi * (x - 1.0 + edge) / edge));
        return 1.0;
    }

    std::string describe() const {
        if (kind == TaperKind::rectangular) return "rectangular";
        return "tukey:" + std::to_string(alpha_T);
    }
};

inline TaperSpec parse_taper(const std::string& s) {
    if (s == "rect" || s == "rectangular") return TaperSpec::rectangular();
    if (s.rfind("tukey:", 0) == 0) return TaperSpec::tukey(std::stod(s.substr(6)));
    if (s == "hann") return TaperSpec::tukey(1.0);
    throw Error("unknown taper '" + s + "'");
}

// Complex baseband samples at midpoints t_n = -T/2 + (n + 1/2)/fs.
struct SampledWaveform {
    std::vector<cplx> samples;
    double fs = 0.0;
    double T = 0.0;
    TaperSpec taper;
    double energy = 0.0;

    std::size_t size() const { return samples.size(); }
    double dt() const { return 1.0 / fs; }
    double time(std::size_t n) const { return -0.5 * T + (static_cast<double>(n) + 0.5) / fs; }

    void normalize() {
        double e = 0.0;
        for (const auto& s : samples) e += std::norm(s);
        e /= fs;
        if (!(e > 0.0)) throw Error("waveform has zero energy");
        const double g = 1.0 / std::sqrt(e);
        for (auto& s : samples) s *= g;
        energy = 1.0;
    }
};

inline std::size_t sample_count(double fs, double T) {
    const auto n = static_cast<long long>(std::llround(fs * T));
    if (n < 1) throw Error("sample rate too low for the pulse length");
    return static_cast<std::size_t>(n);
}

inline std::vector<double> modulation_function(const ModulationIndices& idx, std::span<const double> t_grid) {
    std::vector<double> out(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) out[i] = idx.modulation(t_grid[i]);
    return out;
}

namespace detail {

// Newton polish of a grid extremum of m(t) using m' and m''.
inline double polish_extremum(const ModulationIndices& idx, double t0, double h) {
    const double w0 = two_pi / idx.T;
    double t = t0;
    for (int it = 0; it < 20; ++it) {
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t k = 1; k <= idx.K(); ++k) {
            const double kw = static_cast<double>(k) * w0;
            const double c = std::cos(kw * t), s = std::sin(kw * t);
            d1 += kw * (-idx.a(k) * s + idx.b(k) * c);
            d2 -= kw * kw * (idx.a(k) * c + idx.b(k) * s);
        }
        if (d2 == 0.0) break;
        const double step = d1 / d2;
        if (!(std::abs(step) <= h)) break;
        t -= step;
        if (std::abs(t - t0) > h) return idx.modulation(t0);
        if (std::abs(step) < 1e-15 * idx.T) break;
    }
    return idx.modulation(t);
}

}  // namespace detail

// Peak-to-peak of m(t) over one period: grid search, then Newton polish.
inline double swept_bandwidth(const ModulationIndices& idx, std::size_t grid_points = 4096) {
    const auto t = linspace(-0.5 * idx.T, 0.5 * idx.T, grid_points);
    const auto m = modulation_function(idx, t);
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    const double h = idx.T / static_cast<double>(grid_points - 1);
    const double vhi = std::max(*hi, detail::polish_extremum(idx, t[hi - m.begin()], h));
    const double vlo = std::min(*lo, detail::polish_extremum(idx, t[lo - m.begin()], h));
    return vhi - vlo;
}

inline double time_bandwidth_product(const ModulationIndices& idx) { return idx.T * swept_bandwidth(idx); }

// Ten times the swept bandwidth (one resolution cell of 1/T for a bare pulse).
inline double default_sample_rate(const ModulationIndices& idx) {
    return 10.0 * std::max(swept_bandwidth(idx), 1.0 / idx.T);
}

inline ModulationIndices scale_to_bandwidth(const ModulationIndices& idx, double delta_f) {
    idx.validate();
    if (!(delta_f > 0.0)) throw Error("target bandwidth must be positive");
    const double current = swept_bandwidth(idx);
    if (idx.is_zero() || !(current > 0.0)) throw Error("cannot scale a zero modulation function");
    const double g = delta_f / current;
    ModulationIndices out = idx;
    for (auto& a : out.alphas) a *= g;
    for (auto& b : out.betas) b *= g;
    return out;
}

inline SampledWaveform synthesize(const ModulationIndices& idx, double fs, TaperSpec taper = {}) {
    idx.validate();
    const double bw = swept_bandwidth(idx);
    if (!(fs >= 2.0 * bw) || !(fs > 0.0)) throw Error("undersampled");
    SampledWaveform w;
    const std::size_t N = sample_count(fs, idx.T);
    // Snap the rate so an integer number of samples tiles the pulse.
    w.fs = static_cast<double>(N) / idx.T;
    w.T = idx.T;
    w.taper = taper;
    w.samples.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        const double x = (static_cast<double>(n) + 0.5) / static_cast<double>(N);
        w.samples[n] = std::polar(taper.value(x), idx.phase(w.time(n)));
    }
    w.normalize();
    return w;
}

// 10 log10(max |s|^2 / mean |s|^2).
inline double pmepr(const SampledWaveform& w) {
    if (w.samples.empty()) throw Error("pmepr of empty waveform");
    double peak = 0.0, mean = 0.0;
    for (const auto& s : w.samples) {
        const double p = std::norm(s);
        peak = std::max(peak, p);
        mean += p;
    }
    mean /= static_cast<double>(w.samples.size());
    return 10.0 * std::log10(peak / mean);
}

struct Spectrum {
    std::vector<double> f;
    std::vector<cplx> S;
};

// Zero-padded FFT estimate of S(f) = int s(t) exp(-j 2 pi f t) dt, ordered by
// increasing frequency over [-fs/2, fs/2).
inline Spectrum spectrum_fft(const SampledWaveform& w, std::size_t pad_factor = 8) {
    const std::size_t L = next_pow2(std::max<std::size_t>(pad_factor, 1) * w.size());
    std::vector<cplx> buf(L);
    std::copy(w.samples.begin(), w.samples.end(), buf.begin());
    fft::forward(buf);
    Spectrum out;
    out.f.resize(L);
    out.S.resize(L);
    const double t0 = w.time(0);
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t k = (i + L / 2) % L;
        const double f = fft::bin_frequency(k, L, w.fs);
        out.f[i] = f;
        out.S[i] = buf[k] * std::polar(1.0 / w.fs, -two_pi * f * t0);
    }
    return out;
}

// Fraction of energy inside |f| <= W/2.
inline double spectral_efficiency(const SampledWaveform& w, double W, std::size_t pad_factor = 8) {
    if (!(W > 0.0) || W > w.fs * (1.0 + 1e-12)) throw Error("band must satisfy 0 < W <= fs");
    const auto spec = spectrum_fft(w, std::max<std::size_t>(pad_factor, 8));
    double in = 0.0, total = 0.0;
    for (std::size_t i = 0; i < spec.f.size(); ++i) {
        const double e = std::norm(spec.S[i]);
        total += e;
        if (std::abs(spec.f[i]) <= 0.5 * W) in += e;
    }
    return in / total;
}

// Mean-square instantaneous angular frequency, (2 pi/T)^2 sum_k k^2 (alpha_k^2 + beta_k^2)/2.
inline double rms_bandwidth_sq(const ModulationIndices& idx) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= idx.K(); ++k) {
        const double kk = static_cast<double>(k);
        acc += kk * kk * (idx.alphas[k - 1] * idx.alphas[k - 1] + idx.betas[k - 1] * idx.betas[k - 1]);
    }
    const double w = two_pi / idx.T;
    return w * w * 0.5 * acc;
}

// S(f) = sqrt(T) sum_m c_m sinc[pi T (f - m/T - a0/2)].
inline std::vector<cplx> spectrum_closed_form(const ModulationIndices& idx, std::span<const double> f_grid,
                                              double tol = 1e-9) {
    idx.validate();
    const auto c = gbf_coefficients_tol(idx.gbf_args(), tol);
    std::vector<cplx> out(f_grid.size());
    const double sT = std::sqrt(idx.T);
    for (std::size_t i = 0; i < f_grid.size(); ++i) {
        cplx acc = 0.0;
        const double x = idx.T * (f_grid[i] - 0.5 * idx.a0);
        for (int m = c.order_min; m <= c.order_max; ++m) acc += c[m] * sinc(pi * (x - m));
        out[i] = sT * acc;
    }
    return out;
}

// i.i.d. Gaussian Fourier coefficients for the selected set, scaled so the
// modulation function sweeps TBP/T with T = 1. Deterministic in `seed`.
inline ModulationIndices random_thumbtack_init(std::size_t K, double tbp, Symmetry symmetry, std::uint64_t seed) {
    if (K < 1) throw Error("K must be at least 1");
    if (!(tbp > 0.0)) throw Error("TBP must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ModulationIndices idx;
    idx.T = 1.0;
    idx.alphas.assign(K, 0.0);
    idx.betas.assign(K, 0.0);
    for (std::size_t k = 1; k <= K; ++k) {
        const double kk = static_cast<double>(k);
        if (symmetry != Symmetry::odd) idx.alphas[k - 1] = gauss(rng) * idx.T / kk;
        if (symmetry != Symmetry::even) idx.betas[k - 1] = gauss(rng) * idx.T / kk;
    }
    return scale_to_bandwidth(idx, tbp / idx.T);
}

namespace presets {

// Even-symmetric K = 32 design with TBP 200 at T = 1, Delta f = 200 Hz.
inline ModulationIndices table1() {
    return ModulationIndices::even({-4.2909, 2.5581, -2.4357, -2.7362, 4.8250, 0.3325,  -0.2497, 1.5560,
                                    1.2757,  2.2940, -1.3832, 0.0763,  -0.0372, 1.1292,  0.7528,  0.6234,
                                    -0.0817, 1.3951, 0.2267,  -0.1998, -0.1366, 0.7981,  -0.1766, 0.7064,
                                    0.3201,  -0.0695, 0.0384, -0.6179, -0.8159, -0.2587, 0.4640,  -0.2167},
                                   1.0);
}

inline ModulationIndices zero(std::size_t K = 1, double T = 1.0) {
    return ModulationIndices::even(std::vector<double>(K, 0.0), T);
}

}  // namespace presets

}  // namespace mtsfm
