#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace properize::quad {

struct Options {
    double abs_tol;
    std::size_t max_panels;

    Options();
    explicit Options(double tol, std::size_t cap = std::size_t{1} << 20)
        : abs_tol(tol), max_panels(cap) {}
};

// Process-wide default absolute tolerance (1e-8 unless overridden).
double default_tolerance();
void set_default_tolerance(double tol);

// Adaptive composite Simpson over [a, b]. The interval is pre-split at the
// given interior knots so that kinks and atoms of the integrand align with
// panel boundaries. Returns +/-inf if the integrand evaluates to +/-inf at
// a point of positive measure weight. Throws Error(quadrature_failure) if
// the panel budget is exhausted before the tolerance is met, or if the
// integrand produces NaN.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const Options& opt = Options(), std::span<const double> interior_knots = {});

} // namespace properize::quad
