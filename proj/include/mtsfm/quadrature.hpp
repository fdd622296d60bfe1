#pragma once

#include <array>
#include <functional>
#include <sstream>
#include <vector>

#include "mtsfm/core.hpp"

namespace mtsfm::quad {

// Weights that turn the composite midpoint rule on a uniform grid into a
// high-order rule. Node n sits at (n + 1/2) h from the nearer endpoint; the
// corrected integral is
//   h * [ sum_n g_n + sum_{n<q} e_n (g_n + g_{L-1-n}) ]
// where e_n folds the first three odd-derivative Euler-Maclaurin terms,
// each derivative estimated by one-sided interpolation through q nodes.
// Exact for polynomials up to degree 6.
class MidpointEndCorrection {
public:
    static constexpr std::size_t order = 8;

    static const MidpointEndCorrection& instance() {
        static const MidpointEndCorrection c;
        return c;
    }

    const std::array<double, order>& weights() const { return e_; }

    // Applies the correction to an already accumulated midpoint sum.
    // `at(n)` returns the n-th integrand sample, 0 <= n < count.
    template <typename T, typename Access>
    T corrected(T plain_sum, std::size_t count, Access&& at) const {
        if (count < 2 * order) return plain_sum;
        T acc = plain_sum;
        for (std::size_t n = 0; n < order; ++n) acc += e_[n] * (at(n) + at(count - 1 - n));
        return acc;
    }

private:
    MidpointEndCorrection() {
        const auto d1 = derivative_weights(1);
        const auto d3 = derivative_weights(3);
        const auto d5 = derivative_weights(5);
        for (std::size_t n = 0; n < order; ++n)
            e_[n] = static_cast<double>(-d1[n] / 24.0L + 7.0L * d3[n] / 5760.0L - 31.0L * d5[n] / 967680.0L);
    }

    // Weights D with sum_n D_n p(x_n) = p^(deriv)(0) for polynomials of
    // degree < order, nodes x_n = n + 1/2.
    static std::array<long double, order> derivative_weights(int deriv) {
        constexpr std::size_t q = order;
        std::array<std::array<long double, q + 1>, q> a{};
        for (std::size_t j = 0; j < q; ++j) {
            for (std::size_t n = 0; n < q; ++n) {
                long double x = static_cast<long double>(n) + 0.5L;
                long double p = 1.0L;
                for (std::size_t e = 0; e < j; ++e) p *= x;
                a[j][n] = p;
            }
            long double rhs = 0.0L;
            if (static_cast<int>(j) == deriv) {
                rhs = 1.0L;
                for (int f = 2; f <= deriv; ++f) rhs *= f;
            }
            a[j][q] = rhs;
        }
        // Gaussian elimination with partial pivoting.
        for (std::size_t c = 0; c < q; ++c) {
            std::size_t piv = c;
            for (std::size_t r = c + 1; r < q; ++r)
                if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
            std::swap(a[c], a[piv]);
            for (std::size_t r = 0; r < q; ++r) {
                if (r == c) continue;
                const long double f = a[r][c] / a[c][c];
                for (std::size_t k = c; k <= q; ++k) a[r][k] -= f * a[c][k];
            }
        }
        std::array<long double, q> w{};
        for (std::size_t n = 0; n < q; ++n) w[n] = a[n][q] / a[n][n];
        return w;
    }

    std::array<double, order> e_{};
};

struct AdaptiveResult {
    cplx value;
    double error_estimate;
    std::size_t evaluations;
};

// Adaptive Gauss-Kronrod (7/15) quadrature of a complex integrand on [a, b].
// Bisects the interval with the largest error until the summed error estimate
// falls below abs_tol. Throws Error when max_intervals is exhausted.
inline AdaptiveResult gauss_kronrod(const std::function<cplx(double)>& f, double a, double b, double abs_tol,
                                    std::size_t max_intervals = 200000) {
    static constexpr std::array<double, 8> xk = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
        0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
        0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> wg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                                 0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    struct Piece {
        double a, b;
        cplx value;
        double err;
    };
    std::size_t evals = 0;
    auto rule = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        const cplx fc = f(c);
        cplx k = wk[7] * fc;
        cplx g = wg[3] * fc;
        for (std::size_t i = 0; i < 7; ++i) {
            const cplx f1 = f(c - h * xk[i]);
            const cplx f2 = f(c + h * xk[i]);
            k += wk[i] * (f1 + f2);
            if (i % 2 == 1) g += wg[i / 2] * (f1 + f2);
        }
        evals += 15;
        return Piece{lo, hi, k * h, std::abs((k - g) * h)};
    };

    std::vector<Piece> pieces{rule(a, b)};
    while (true) {
        cplx total = 0.0;
        double err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            total += pieces[i].value;
            err += pieces[i].err;
            if (pieces[i].err > pieces[worst].err) worst = i;
        }
        if (err < abs_tol) return {total, err, evals};
        if (pieces.size() >= max_intervals) {
            std::ostringstream msg;
            msg << "quadrature did not converge: achieved error " << err;
            throw Error(msg.str());
        }
        const Piece p = pieces[worst];
        const double mid = 0.5 * (p.a + p.b);
        pieces[worst] = rule(p.a, mid);
        pieces.push_back(rule(mid, p.b));
    }
}

}  // namespace mtsfm::quad
