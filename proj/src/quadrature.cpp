#include "properize/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "properize/error.hpp"

namespace properize {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::incompatible_rule: return "IncompatibleRule";
        case ErrorCode::degenerate_forecast: return "DegenerateForecast";
        case ErrorCode::weight_mass_zero: return "WeightMassZero";
        case ErrorCode::no_density: return "NoDensity";
        case ErrorCode::unbounded_support: return "UnboundedSupport";
        case ErrorCode::quadrature_failure: return "QuadratureFailure";
        case ErrorCode::budget_exceeded: return "BudgetExceeded";
        case ErrorCode::invalid_shape: return "InvalidShape";
        case ErrorCode::invalid_distribution: return "InvalidDistribution";
        case ErrorCode::invalid_rule: return "InvalidRule";
        case ErrorCode::no_bayes_act: return "NoBayesAct";
        case ErrorCode::parse_error: return "ParseError";
    }
    return "UnknownError";
}

namespace quad {

namespace {

std::atomic<double> g_default_tol{1e-8};

struct InfiniteIntegrand {
    int sign; // +1 or -1
};

double eval(const std::function<double(double)>& f, double x) {
    double v = f(x);
    if (std::isnan(v)) {
        throw Error(ErrorCode::quadrature_failure, "integrand evaluated to NaN");
    }
    if (std::isinf(v)) {
        throw InfiniteIntegrand{v > 0 ? 1 : -1};
    }
    return v;
}

double simpson(double fa, double fm, double fb, double h) {
    return (fa + 4.0 * fm + fb) * (h / 6.0);
}

struct Worker {
    const std::function<double(double)>& f;
    std::size_t panels_left;

    double refine(double a, double b, double fa, double fm, double fb, double whole, double tol,
                  int depth) {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m);
        double rm = 0.5 * (m + b);
        double flm = eval(f, lm);
        double frm = eval(f, rm);
        double left = simpson(fa, flm, fm, m - a);
        double right = simpson(fm, frm, fb, b - m);
        double delta = left + right - whole;
        // Standard Richardson acceptance for Simpson halving.
        if (depth > 0 && std::abs(delta) <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        if (panels_left < 2) {
            throw Error(ErrorCode::quadrature_failure, "panel budget exhausted");
        }
        panels_left -= 2;
        double half_tol = 0.5 * tol;
        return refine(a, m, fa, flm, fm, left, half_tol, depth + 1) +
               refine(m, b, fm, frm, fb, right, half_tol, depth + 1);
    }

    double run(double a, double b, double tol) {
        double fa = eval(f, a);
        double fb = eval(f, b);
        double m = 0.5 * (a + b);
        double fm = eval(f, m);
        double whole = simpson(fa, fm, fb, b - a);
        return refine(a, b, fa, fm, fb, whole, tol, 0);
    }
};

} // namespace

Options::Options() : abs_tol(default_tolerance()), max_panels(std::size_t{1} << 20) {}

double default_tolerance() { return g_default_tol.load(std::memory_order_relaxed); }

void set_default_tolerance(double tol) {
    if (!(tol > 0.0)) {
        throw Error(ErrorCode::quadrature_failure, "tolerance must be positive");
    }
    g_default_tol.store(tol, std::memory_order_relaxed);
}

double integrate(const std::function<double(double)>& f, double a, double b, const Options& opt,
                 std::span<const double> interior_knots) {
    if (!(a <= b)) {
        throw Error(ErrorCode::quadrature_failure, "integration bounds out of order");
    }
    if (a == b) {
        return 0.0;
    }
    std::vector<double> cuts;
    cuts.reserve(interior_knots.size() + 2);
    cuts.push_back(a);
    for (double k : interior_knots) {
        if (k > a && k < b) {
            cuts.push_back(k);
        }
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    Worker worker{f, opt.max_panels};
    double total = 0.0;
    double span = b - a;
    try {
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double lo = cuts[i];
            double hi = cuts[i + 1];
            double local_tol = std::max(opt.abs_tol * (hi - lo) / span, 1e-300);
            total += worker.run(lo, hi, local_tol);
        }
    } catch (const InfiniteIntegrand& inf) {
        return inf.sign > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    }
    return total;
}

} // namespace quad
} // namespace properize
