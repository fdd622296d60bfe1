#pragma once

// Phase-coded baselines: maximal-length binary sequences, CAN polyphase
// codes, and their rectangular-chip sampled waveforms.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"
#include "mtsfm/waveform.hpp"

namespace mtsfm {

struct PhaseCode {
    std::vector<double> thetas;
    // Provenance.
    std::string kind = "custom";  // mseq | can | random | custom
    int degree = 0;
    std::vector<int> taps;
    std::uint32_t seed_state = 0;
    bool padded = false;
    std::uint64_t seed = 0;
    int iterations = 0;

    std::size_t size() const { return thetas.size(); }

    std::vector<cplx> chips() const {
        std::vector<cplx> c(thetas.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::polar(1.0, thetas[i]);
        return c;
    }
};

// Feedback taps (exponents of a primitive polynomial) per register length.
inline const std::vector<int>& mseq_taps(int degree) {
    static const std::vector<std::vector<int>> table = {
        {}, {}, {2, 1}, {3, 2}, {4, 3}, {5, 3}, {6, 5}, {7, 6}, {8, 6, 5, 4}, {9, 5}, {10, 7}, {11, 9}, {12, 11, 10, 4}};
    if (degree < 2 || degree > 12) throw Error("m-sequence degree must lie in [2, 12]");
    return table[static_cast<std::size_t>(degree)];
}

// Fibonacci LFSR output as +-1 values (bit 0 -> +1), length 2^degree - 1.
inline std::vector<int> mseq_bits(int degree, std::uint32_t seed_state = 1) {
    const auto& taps = mseq_taps(degree);
    const std::uint32_t mask = (1u << degree) - 1u;
    std::uint32_t s = seed_state & mask;
    if (s == 0) throw Error("m-sequence seed state must be nonzero");
    const std::size_t len = (std::size_t{1} << degree) - 1;
    std::vector<int> out(len);
    for (std::size_t i = 0; i < len; ++i) {
        out[i] = (s & 1u) ? -1 : 1;
        std::uint32_t fb = 0;
        for (int t : taps) fb ^= (s >> (degree - t)) & 1u;
        s = (s >> 1) | (fb << (degree - 1));
    }
    return out;
}

inline PhaseCode mseq(int degree, std::uint32_t seed_state = 1) {
    const auto bits = mseq_bits(degree, seed_state);
    PhaseCode c;
    c.kind = "mseq";
    c.degree = degree;
    c.taps = mseq_taps(degree);
    c.seed_state = seed_state;
    c.thetas.resize(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) c.thetas[i] = bits[i] > 0 ? 0.0 : pi;
    return c;
}

// Repeats the final chip until the length is a power of two.
inline PhaseCode pad_to_pow2(PhaseCode c) {
    if (c.thetas.empty()) throw Error("cannot pad an empty code");
    const std::size_t target = next_pow2(c.thetas.size());
    if (target != c.thetas.size()) {
        c.thetas.resize(target, c.thetas.back());
        c.padded = true;
    }
    return c;
}

inline std::vector<long long> periodic_autocorrelation(const std::vector<int>& x) {
    const std::size_t N = x.size();
    std::vector<long long> r(N, 0);
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t n = 0; n < N; ++n) r[k] += static_cast<long long>(x[n]) * x[(n + k) % N];
    return r;
}

// r_k = sum_n x_{n+k} conj(x_n), k = 0..N-1.
inline std::vector<cplx> aperiodic_autocorrelation(const std::vector<cplx>& x) {
    const std::size_t N = x.size();
    std::vector<cplx> r(N);
    for (std::size_t k = 0; k < N; ++k) {
        cplx acc = 0.0;
        for (std::size_t n = 0; n + k < N; ++n) acc += x[n + k] * std::conj(x[n]);
        r[k] = acc;
    }
    return r;
}

// Discrete integrated sidelobe level sum_{k != 0} |r_k|^2.
inline double isl(const PhaseCode& c) {
    const auto r = aperiodic_autocorrelation(c.chips());
    double acc = 0.0;
    for (std::size_t k = 1; k < r.size(); ++k) acc += 2.0 * std::norm(r[k]);
    return acc;
}

inline double merit_factor(const PhaseCode& c) {
    const double N = static_cast<double>(c.size());
    return N * N / isl(c);
}

inline PhaseCode random_phase_code(std::size_t N, std::uint64_t seed, bool biphase = false) {
    std::mt19937_64 rng(seed);
    PhaseCode c;
    c.kind = "random";
    c.seed = seed;
    c.thetas.resize(N);
    if (biphase) {
        std::bernoulli_distribution coin(0.5);
        for (auto& t : c.thetas) t = coin(rng) ? pi : 0.0;
    } else {
        std::uniform_real_distribution<double> u(0.0, two_pi);
        for (auto& t : c.thetas) t = u(rng);
    }
    return c;
}

struct CanTrace {
    std::vector<double> criterion;  // sum_p (|F_p| - sqrt(N))^2 per iteration
};

// Cyclic Algorithm New: alternate the 2N-point spectral phase fit and the
// unimodular projection, from a seeded random-phase start.
inline PhaseCode can_optimize(std::size_t N, std::uint64_t seed, int max_iters = 10000, double tol = 1e-5,
                              CanTrace* trace = nullptr) {
    if (N < 4) throw Error("CAN needs N >= 4");
    PhaseCode c = random_phase_code(N, seed);
    c.kind = "can";
    const std::size_t L = 2 * N;
    const double target = std::sqrt(static_cast<double>(N));
    std::vector<cplx> buf(L);
    auto spectrum = [&](const std::vector<double>& th) {
        std::fill(buf.begin(), buf.end(), cplx{});
        for (std::size_t n = 0; n < N; ++n) buf[n] = std::polar(1.0, th[n]);
        fft::forward(buf);
    };
    auto criterion = [&]() {
        double acc = 0.0;
        for (const auto& v : buf) {
            const double d = std::abs(v) - target;
            acc += d * d;
        }
        return acc;
    };
    spectrum(c.thetas);
    if (trace) trace->criterion.push_back(criterion());
    int it = 0;
    for (; it < max_iters; ++it) {
        // v_p = sqrt(N) exp(j arg F_p); z = F^H v; x_n = exp(j arg z_n).
        for (auto& v : buf) v = std::abs(v) > 0.0 ? target * v / std::abs(v) : cplx(target, 0.0);
        fft::inverse(buf);
        double change = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double th = std::arg(buf[n]);
            double d = std::remainder(th - c.thetas[n], two_pi);
            change = std::max(change, std::abs(d));
            c.thetas[n] = th;
        }
        spectrum(c.thetas);
        if (trace) trace->criterion.push_back(criterion());
        if (change < tol) {
            ++it;
            break;
        }
    }
    c.iterations = it;
    return c;
}

struct PcWaveform {
    SampledWaveform waveform;
    std::size_t chips = 0;
    double chip_duration = 0.0;
};

// Rectangular chips of duration T/N, optional full-pulse taper, unit energy.
inline PcWaveform pc_synthesize(const PhaseCode& code, double T, double fs, TaperSpec taper = {}) {
    const std::size_t N = code.size();
    if (N < 2) throw Error("phase code needs at least 2 chips");
    if (!(T > 0.0)) throw Error("pulse length must be positive");
    if (fs * T / static_cast<double>(N) < 4.0 - 1e-9) throw Error("undersampled chips: need at least 4 samples per chip");
    PcWaveform pc;
    pc.chips = N;
    pc.chip_duration = T / static_cast<double>(N);
    auto& w = pc.waveform;
    const std::size_t S = sample_count(fs, T);
    w.fs = static_cast<double>(S) / T;
    w.T = T;
    w.taper = taper;
    w.samples.resize(S);
    for (std::size_t n = 0; n < S; ++n) {
        const double x = (static_cast<double>(n) + 0.5) / static_cast<double>(S);
        const auto chip = std::min(N - 1, static_cast<std::size_t>(std::floor(x * static_cast<double>(N))));
        w.samples[n] = std::polar(taper.value(x), code.thetas[chip]);
    }
    w.normalize();
    return pc;
}

}  // namespace mtsfm
