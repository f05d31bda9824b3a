#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "spectral_shrink/common.hpp"

namespace spectral_shrink {

struct ScalarMinimum {
    double x;
    double value;
};

// Golden-section search for the minimum of a unimodal function on [lo, hi].
// Tolerates kinks (piecewise-smooth losses); converges to the boundary when
// the minimum sits there.
template <typename F>
ScalarMinimum golden_section_minimize(F&& f, double lo, double hi,
                                      double xtol = kMinimizeTol,
                                      int max_iter = 200) {
    if (!(lo <= hi)) throw std::invalid_argument("golden_section_minimize: lo > hi");
    static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;   // 0.618...
    static const double invphi2 = (3.0 - std::sqrt(5.0)) / 2.0;  // 0.382...

    double a = lo, b = hi;
    double h = b - a;
    double c = a + invphi2 * h;
    double d = a + invphi * h;
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < max_iter && h > xtol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = a + invphi2 * h;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + invphi * h;
            fd = f(d);
        }
    }
    // Candidate interior point plus both brackets; the minimum may be at an edge.
    double xm = fc < fd ? c : d;
    double fm = fc < fd ? fc : fd;
    double fa = f(lo), fb = f(hi);
    if (fa <= fm && fa <= fb) return {lo, fa};
    if (fb <= fm) return {hi, fb};
    return {xm, fm};
}

// Bisection on a bracketed sign change. Requires f(lo) and f(hi) of opposite
// sign; returns the midpoint once the interval shrinks below xtol.
template <typename F>
double bisect_root(F&& f, double lo, double hi, double xtol = kRootTol,
                   int max_iter = 200) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw std::runtime_error("bisect_root: endpoints do not bracket a sign change");
    for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace spectral_shrink
