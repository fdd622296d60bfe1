#pragma once

// Independent reference for single GBF values: adaptive quadrature of the
// defining integral (1/2pi) int exp{j[phase(theta) - m theta]} dtheta.
// Slow; intended for validation only.

#include <cstdlib>

#include "mtsfm/gbf.hpp"
#include "mtsfm/quadrature.hpp"

namespace mtsfm {

inline cplx gbf_oracle(const GbfArgs& args, int m, double abs_tol = 1e-12) {
    args.validate();
    if (std::abs(m) > 10000) throw Error("gbf_oracle: |m| must not exceed 1e4");
    const double mm = static_cast<double>(m);
    auto integrand = [&](double theta) { return std::polar(1.0, args.phase(theta) - mm * theta); };
    // Pre-split so each Kronrod panel sees at most a few oscillations.
    double bandwidth = std::abs(mm);
    for (std::size_t k = 0; k < args.K(); ++k)
        bandwidth += static_cast<double>(k + 1) * (std::abs(args.alphas[k]) + std::abs(args.betas[k]));
    const int panels = std::max(4, static_cast<int>(std::ceil(bandwidth / 2.0)));
    cplx total = 0.0;
    const double width = two_pi / panels;
    for (int p = 0; p < panels; ++p) {
        const double a = -pi + width * p;
        total += quad::gauss_kronrod(integrand, a, a + width, abs_tol * two_pi / panels).value;
    }
    return total / two_pi;
}

}  // namespace mtsfm
