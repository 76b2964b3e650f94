#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "properize/error.hpp"

namespace properize {

class Distribution;

struct Bernoulli {
    double p; // P({1})
};

struct Dirac {
    double x;
};

struct Categorical {
    std::vector<double> points; // strictly ascending
    std::vector<double> probs;  // nonnegative, sum 1
};

struct Gaussian {
    double mu;
    double sigma2;
};

struct UniformInterval {
    double a;
    double b;
};

struct Mixture {
    std::vector<Distribution> components; // flattened: no nested mixtures
    std::vector<double> weights;          // nonnegative, sum 1
};

// Piecewise-linear CDF on an ascending grid. Linear between knots, 0 to the
// left of the first knot and 1 to the right of the last. A positive value at
// the first knot is an atom there.
struct GridCdf {
    std::vector<double> grid;
    std::vector<double> values;
};

struct Moments {
    double mean;
    double variance;
    double third_central;
};

class Distribution {
public:
    using Node = std::variant<Bernoulli, Dirac, Categorical, Gaussian, UniformInterval, Mixture, GridCdf>;

    static Distribution bernoulli(double p);
    static Distribution dirac(double x);
    static Distribution categorical(std::vector<double> points, std::vector<double> probs);
    static Distribution gaussian(double mu, double sigma2);
    static Distribution uniform(double a, double b);
    static Distribution mixture(std::vector<Distribution> components, std::vector<double> weights);
    static Distribution grid_cdf(std::vector<double> grid, std::vector<double> values);

    const Node& node() const { return node_; }

    template <typename T>
    bool is() const { return std::holds_alternative<T>(node_); }

    template <typename T>
    const T& as() const { return std::get<T>(node_); }

    // Short tag such as "gaussian" or "mixture", matching the JSON literal names.
    std::string tag() const;

private:
    explicit Distribution(Node node) : node_(std::move(node)) {}
    Node node_;
};

enum class FamilyTag {
    bernoulli_family,
    p1,
    p2,
    p4plus,
    compact_support,  // P_c(bound)
    variance_capped,  // P_{2,m}
    lebesgue_grid,
};

struct FamilyDescriptor {
    FamilyTag tag = FamilyTag::p1;
    double param = 0.0;            // support bound for compact_support, cap for variance_capped
    std::vector<double> grid;      // lebesgue_grid only

    static FamilyDescriptor tagged(FamilyTag t, double param = 0.0) {
        FamilyDescriptor f;
        f.tag = t;
        f.param = param;
        return f;
    }
    static FamilyDescriptor bernoulli_family() { return tagged(FamilyTag::bernoulli_family); }
    static FamilyDescriptor p1() { return tagged(FamilyTag::p1); }
    static FamilyDescriptor p2() { return tagged(FamilyTag::p2); }
    static FamilyDescriptor p4plus() { return tagged(FamilyTag::p4plus); }
    static FamilyDescriptor compact_support(double bound);
    static FamilyDescriptor variance_capped(double cap);
    static FamilyDescriptor lebesgue_grid(std::vector<double> grid);

    std::string name() const;
};

// Right-continuous CDF, P((-inf, x]).
double cdf(const Distribution& d, double x);

// Lebesgue density. Throws Error(no_density) for distributions with atoms.
double pdf(const Distribution& d, double x);

// Mass of the atom at x (0 for continuous distributions).
double point_mass(const Distribution& d, double x);

Moments moments(const Distribution& d);

// E[(X - c)^k] for k in 1..4, exact per variant.
double central_moment(const Distribution& d, double c, int k);

// [lo, hi] such that at most eps/2 of mass lies below lo and above hi.
struct Interval {
    double lo;
    double hi;
};
Interval support_interval(const Distribution& d, double eps);

// E[f(X)] by exact summation over atoms plus adaptive quadrature over the
// continuous part. extra_knots are forwarded to the quadrature as panel
// boundaries (kinks of f). Returns +/-inf when the integral diverges that way.
double expectation(const Distribution& d, const std::function<double(double)>& f,
                   double abs_tol, std::span<const double> extra_knots = {});

// Distribution of X + c.
Distribution shift(const Distribution& d, double c);

// Distribution of X + Y for independent X ~ d, Y ~ noise. Analytic where
// closed under convolution (Gaussian pairs, point masses, mixtures), numeric
// GridCdf otherwise. Throws Error(unbounded_support) if no grid covering
// 1 - 1e-10 of the mass can be found.
Distribution convolve(const Distribution& d, const Distribution& noise);

// inf{x : cdf(d, x) >= 1/2}; ties resolved to the lowest median.
double median(const Distribution& d);

// [lowest median, highest median]: degenerate unless the CDF plateaus at 1/2.
Interval median_interval(const Distribution& d);

// GridCdf with knot values equal to cdf(d, .) at each grid point; the last
// knot is forced to 1, absorbing the (at most 1e-10) tail mass. Throws
// Error(unbounded_support) if the grid covers less than 1 - 1e-10 of d.
GridCdf discretize(const Distribution& d, std::vector<double> grid);

// Atom locations (Dirac/Bernoulli/Categorical points, mixture atoms, GridCdf
// left-edge atom). Used as quadrature knots and for median snapping.
std::vector<double> atom_points(const Distribution& d);

// CDF kink locations: atoms plus GridCdf knots and uniform endpoints.
std::vector<double> cdf_knots(const Distribution& d);

// sup |cdf(a,x) - cdf(b,x)| over a grid covering both supports plus knots.
double sup_cdf_distance(const Distribution& a, const Distribution& b, std::size_t grid_points = 512);

} // namespace properize
