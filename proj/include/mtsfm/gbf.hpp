#pragma once

// Multi-dimensional generalized Bessel functions: the complex Fourier
// coefficients c_m of exp{j sum_k [alpha_k sin(k theta) - beta_k cos(k theta)]}.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"

namespace mtsfm {

enum class GbfKind { mixed, cylindrical, modified };

inline const char* to_string(GbfKind k) {
    switch (k) {
        case GbfKind::mixed: return "mixed";
        case GbfKind::cylindrical: return "cylindrical";
        case GbfKind::modified: return "modified";
    }
    return "?";
}

struct GbfArgs {
    std::vector<double> alphas;
    std::vector<double> betas;
    GbfKind kind = GbfKind::mixed;

    std::size_t K() const { return alphas.size(); }

    // Picks the most specific kind for the zero pattern of the indices.
    static GbfArgs from(std::vector<double> alphas, std::vector<double> betas) {
        GbfArgs a{std::move(alphas), std::move(betas), GbfKind::mixed};
        const bool no_beta = std::all_of(a.betas.begin(), a.betas.end(), [](double b) { return b == 0.0; });
        const bool no_alpha = std::all_of(a.alphas.begin(), a.alphas.end(), [](double x) { return x == 0.0; });
        if (no_beta)
            a.kind = GbfKind::cylindrical;
        else if (no_alpha)
            a.kind = GbfKind::modified;
        a.validate();
        return a;
    }

    void validate() const {
        if (alphas.empty()) throw Error("gbf: K must be at least 1");
        if (alphas.size() != betas.size()) throw Error("gbf: alphas and betas differ in length");
        for (std::size_t k = 0; k < alphas.size(); ++k)
            if (!std::isfinite(alphas[k]) || !std::isfinite(betas[k])) throw Error("gbf: non-finite modulation index");
        if (kind == GbfKind::cylindrical)
            for (double b : betas)
                if (b != 0.0) throw Error("gbf: cylindrical kind requires all betas to be zero");
        if (kind == GbfKind::modified)
            for (double a : alphas)
                if (a != 0.0) throw Error("gbf: modified kind requires all alphas to be zero");
    }

    // Phase exp argument at angle theta.
    double phase(double theta) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < alphas.size(); ++k) {
            const double kt = static_cast<double>(k + 1) * theta;
            acc += alphas[k] * std::sin(kt) - betas[k] * std::cos(kt);
        }
        return acc;
    }
};

// Truncated coefficient vector c_m for order_min <= m <= order_max.
struct GbfCoefficients {
    int order_min = 0;
    int order_max = 0;
    std::vector<cplx> values;
    double residual_energy = 0.0;

    int max_order() const { return order_max; }
    bool contains(int m) const { return m >= order_min && m <= order_max; }
    cplx operator[](int m) const { return contains(m) ? values[static_cast<std::size_t>(m - order_min)] : cplx{}; }
    cplx& at(int m) { return values.at(static_cast<std::size_t>(m - order_min)); }

    double energy() const {
        double e = 0.0;
        for (const auto& v : values) e += std::norm(v);
        return e;
    }

    // Copy restricted to |m| <= M (M must not exceed the stored range).
    GbfCoefficients truncated(int M) const {
        if (M > order_max || -M < order_min) throw Error("gbf: truncation beyond stored range");
        GbfCoefficients out;
        out.order_min = -M;
        out.order_max = M;
        out.values.assign(values.begin() + (-M - order_min), values.begin() + (M - order_min + 1));
        out.residual_energy = 1.0 - out.energy();
        return out;
    }
};

namespace detail {

// Samples exp(j phase(theta)) on theta_n = -pi + 2 pi n / N and returns its
// unnormalized DFT. Sines and cosines of k theta come from the angle-addition
// recurrence on exact sin/cos of theta.
inline std::vector<cplx> gbf_spectrum(const GbfArgs& args, std::size_t N) {
    std::vector<cplx> f(N);
    const std::size_t K = args.K();
    for (std::size_t n = 0; n < N; ++n) {
        const double theta = -pi + two_pi * static_cast<double>(n) / static_cast<double>(N);
        const double s1 = std::sin(theta);
        const double c1 = std::cos(theta);
        double sk = s1, ck = c1, acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            acc += args.alphas[k] * sk - args.betas[k] * ck;
            const double sn = sk * c1 + ck * s1;
            const double cn = ck * c1 - sk * s1;
            sk = sn;
            ck = cn;
        }
        f[n] = std::polar(1.0, acc);
    }
    fft::forward(f);
    return f;
}

}  // namespace detail

// FFT route: N >= 8 (2M + 1) samples of the phase exponential, rounded up to
// a power of two. The theta grid starts at -pi, which multiplies bin m by
// (-1)^m relative to the Fourier coefficient.
inline GbfCoefficients gbf_coefficients(const GbfArgs& args, int M) {
    args.validate();
    if (M < 0) throw Error("gbf: order must be non-negative");
    const std::size_t N = next_pow2(8 * (2 * static_cast<std::size_t>(M) + 1));
    const auto spec = detail::gbf_spectrum(args, N);
    GbfCoefficients out;
    out.order_min = -M;
    out.order_max = M;
    out.values.resize(2 * static_cast<std::size_t>(M) + 1);
    const double inv = 1.0 / static_cast<double>(N);
    const auto NN = static_cast<long long>(N);
    for (int m = -M; m <= M; ++m) {
        const auto bin = static_cast<std::size_t>(((m % NN) + NN) % NN);
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        out.values[static_cast<std::size_t>(m + M)] = spec[bin] * (sign * inv);
    }
    if (args.kind == GbfKind::cylindrical)
        for (auto& v : out.values) v = cplx(v.real(), 0.0);
    out.residual_energy = 1.0 - out.energy();
    return out;
}

struct TruncationConfig {
    double tol = 1e-9;
    int max_order = 1 << 16;
};

// Smallest M whose Parseval residual 1 - sum_{|m|<=M} |c_m|^2 is below tol.
// Doubles M from a bandwidth-based guess until the residual clears tol, then
// walks back down the computed coefficient set.
inline int truncation_order(const GbfArgs& args, double tol, int max_order = 1 << 16) {
    args.validate();
    if (!(tol > 0.0 && tol < 1.0)) throw Error("gbf: tolerance must lie in (0, 1)");
    double guess = 0.0;
    for (std::size_t k = 0; k < args.K(); ++k)
        guess += static_cast<double>(k + 1) * (std::abs(args.alphas[k]) + std::abs(args.betas[k]));
    int M = std::max(1, static_cast<int>(std::ceil(guess)));
    while (true) {
        if (M > max_order) throw Error("truncation cap exceeded");
        const auto c = gbf_coefficients(args, M);
        if (c.residual_energy < tol) {
            // Residual outside |m| <= j, accumulated from the edges inward.
            double outside = c.residual_energy;
            int best = M;
            for (int j = M; j >= 0; --j) {
                if (outside >= tol) break;
                best = j;
                if (j == 0) break;
                outside += std::norm(c[j]) + std::norm(c[-j]);
            }
            return best;
        }
        if (M == max_order) throw Error("truncation cap exceeded");
        M = std::min(2 * M, max_order);
    }
}

inline GbfCoefficients gbf_coefficients_tol(const GbfArgs& args, double tol) {
    return gbf_coefficients(args, truncation_order(args, tol));
}

enum class Wrt { alpha, beta };

// Analytic partial derivative of every c_m in |m| <= M - k with respect to
// alpha_k or beta_k, from the generating-function recurrences
//   dc_m/dalpha_k = (c_{m-k} - c_{m+k}) / 2
//   dc_m/dbeta_k  = -j (c_{m-k} + c_{m+k}) / 2
inline GbfCoefficients gbf_partial(const GbfArgs& args, const GbfCoefficients& coeffs, int k, Wrt wrt) {
    if (k < 1 || static_cast<std::size_t>(k) > args.K()) throw Error("gbf: harmonic index out of range");
    const int M = std::min(coeffs.order_max, -coeffs.order_min) - k;
    if (M < 0) throw Error("order margin too small");
    GbfCoefficients out;
    out.order_min = -M;
    out.order_max = M;
    out.values.resize(2 * static_cast<std::size_t>(M) + 1);
    const cplx minus_j(0.0, -1.0);
    for (int m = -M; m <= M; ++m) {
        const cplx lo = coeffs[m - k];
        const cplx hi = coeffs[m + k];
        out.values[static_cast<std::size_t>(m + M)] = wrt == Wrt::alpha ? 0.5 * (lo - hi) : 0.5 * minus_j * (lo + hi);
    }
    out.residual_energy = 0.0;
    return out;
}

}  // namespace mtsfm
