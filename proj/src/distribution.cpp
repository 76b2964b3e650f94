#include "properize/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "properize/quadrature.hpp"

namespace properize {

namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kCoverageTol = 1e-10;
constexpr double kTailEps = 1e-12;
const double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw Error(ErrorCode::invalid_distribution, what);
    }
}

double normal_cdf(double x, double mu, double sigma2) {
    return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * sigma2));
}

double normal_pdf(double x, double mu, double sigma2) {
    double z = (x - mu) * (x - mu) / sigma2;
    return std::exp(-0.5 * z) / std::sqrt(2.0 * M_PI * sigma2);
}

// Index of the grid segment [grid[i], grid[i+1]) containing x; assumes
// grid.front() <= x <= grid.back().
std::size_t segment_index(const std::vector<double>& grid, double x) {
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    std::size_t i = static_cast<std::size_t>(it - grid.begin());
    if (i == 0) {
        return 0;
    }
    if (i >= grid.size()) {
        return grid.size() - 2;
    }
    return i - 1;
}

double grid_cdf_value(const GridCdf& g, double x) {
    if (x < g.grid.front()) {
        return 0.0;
    }
    if (x >= g.grid.back()) {
        return 1.0;
    }
    std::size_t i = segment_index(g.grid, x);
    double x0 = g.grid[i];
    double x1 = g.grid[i + 1];
    double v0 = g.values[i];
    double v1 = g.values[i + 1];
    return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
}

double grid_slope(const GridCdf& g, double x) {
    if (x < g.grid.front() || x > g.grid.back()) {
        return 0.0;
    }
    std::size_t i = x >= g.grid.back() ? g.grid.size() - 2 : segment_index(g.grid, x);
    return (g.values[i + 1] - g.values[i]) / (g.grid[i + 1] - g.grid[i]);
}

} // namespace

Distribution Distribution::bernoulli(double p) {
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "bernoulli p must lie in [0,1]");
    return Distribution(Bernoulli{p});
}

Distribution Distribution::dirac(double x) {
    require(std::isfinite(x), "dirac point must be finite");
    return Distribution(Dirac{x});
}

Distribution Distribution::categorical(std::vector<double> points, std::vector<double> probs) {
    require(!points.empty(), "categorical needs at least one point");
    require(points.size() == probs.size(), "categorical points/probs size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(std::isfinite(points[i]), "categorical point must be finite");
        require(i == 0 || points[i] > points[i - 1], "categorical points must be strictly ascending");
        require(probs[i] >= 0.0, "categorical probabilities must be nonnegative");
        sum += probs[i];
    }
    require(std::abs(sum - 1.0) <= kWeightSumTol, "categorical probabilities must sum to 1");
    return Distribution(Categorical{std::move(points), std::move(probs)});
}

Distribution Distribution::gaussian(double mu, double sigma2) {
    require(std::isfinite(mu) && std::isfinite(sigma2) && sigma2 > 0.0,
            "gaussian needs finite mu and sigma2 > 0");
    return Distribution(Gaussian{mu, sigma2});
}

Distribution Distribution::uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b) && a < b, "uniform needs a < b");
    return Distribution(UniformInterval{a, b});
}

Distribution Distribution::mixture(std::vector<Distribution> components, std::vector<double> weights) {
    require(!components.empty(), "mixture needs at least one component");
    require(components.size() == weights.size(), "mixture components/weights size mismatch");
    double sum = 0.0;
    for (double w : weights) {
        require(std::isfinite(w) && w >= 0.0, "mixture weights must be nonnegative");
        sum += w;
    }
    require(std::abs(sum - 1.0) <= kWeightSumTol, "mixture weights must sum to 1");

    // Flatten nested mixtures so downstream integration stays single level.
    Mixture flat;
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (weights[i] == 0.0) {
            continue;
        }
        if (components[i].is<Mixture>()) {
            const auto& inner = components[i].as<Mixture>();
            for (std::size_t j = 0; j < inner.components.size(); ++j) {
                flat.components.push_back(inner.components[j]);
                flat.weights.push_back(weights[i] * inner.weights[j]);
            }
        } else {
            flat.components.push_back(std::move(components[i]));
            flat.weights.push_back(weights[i]);
        }
    }
    require(!flat.components.empty(), "mixture has no positive-weight components");
    if (flat.components.size() == 1) {
        return flat.components.front();
    }
    return Distribution(std::move(flat));
}

Distribution Distribution::grid_cdf(std::vector<double> grid, std::vector<double> values) {
    require(grid.size() >= 2, "grid_cdf needs at least two knots");
    require(grid.size() == values.size(), "grid_cdf grid/values size mismatch");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require(std::isfinite(grid[i]), "grid_cdf knots must be finite");
        require(i == 0 || grid[i] > grid[i - 1], "grid_cdf knots must be strictly ascending");
        require(values[i] >= 0.0 && values[i] <= 1.0 + kWeightSumTol,
                "grid_cdf values must lie in [0,1]");
        require(i == 0 || values[i] >= values[i - 1], "grid_cdf values must be nondecreasing");
    }
    require(std::abs(values.back() - 1.0) <= kWeightSumTol, "grid_cdf must reach 1 at the last knot");
    values.back() = 1.0;
    for (double& v : values) {
        v = std::min(v, 1.0);
    }
    return Distribution(GridCdf{std::move(grid), std::move(values)});
}

std::string Distribution::tag() const {
    return std::visit(
        [](const auto& node) -> std::string {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) return "bernoulli";
            else if constexpr (std::is_same_v<T, Dirac>) return "dirac";
            else if constexpr (std::is_same_v<T, Categorical>) return "categorical";
            else if constexpr (std::is_same_v<T, Gaussian>) return "gaussian";
            else if constexpr (std::is_same_v<T, UniformInterval>) return "uniform";
            else if constexpr (std::is_same_v<T, Mixture>) return "mixture";
            else return "grid_cdf";
        },
        node_);
}

FamilyDescriptor FamilyDescriptor::compact_support(double bound) {
    if (!(std::isfinite(bound) && bound > 0.0)) {
        throw Error(ErrorCode::invalid_distribution, "compact support bound must be finite and positive");
    }
    return tagged(FamilyTag::compact_support, bound);
}

FamilyDescriptor FamilyDescriptor::variance_capped(double cap) {
    if (!(std::isfinite(cap) && cap > 0.0)) {
        throw Error(ErrorCode::invalid_distribution, "variance cap must be positive");
    }
    return tagged(FamilyTag::variance_capped, cap);
}

FamilyDescriptor FamilyDescriptor::lebesgue_grid(std::vector<double> grid) {
    if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end())) {
        throw Error(ErrorCode::invalid_distribution, "lebesgue grid must be ascending with >= 2 points");
    }
    FamilyDescriptor f = tagged(FamilyTag::lebesgue_grid);
    f.grid = std::move(grid);
    return f;
}

std::string FamilyDescriptor::name() const {
    switch (tag) {
        case FamilyTag::bernoulli_family: return "bernoulli";
        case FamilyTag::p1: return "p1";
        case FamilyTag::p2: return "p2";
        case FamilyTag::p4plus: return "p4plus";
        case FamilyTag::compact_support: {
            std::ostringstream os;
            os << "pc:" << param;
            return os.str();
        }
        case FamilyTag::variance_capped: {
            std::ostringstream os;
            os << "p2m:" << param;
            return os.str();
        }
        case FamilyTag::lebesgue_grid: return "lebesgue";
    }
    return "unknown";
}

double cdf(const Distribution& d, double x) {
    return std::visit(
        [x](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                if (x < 0.0) return 0.0;
                if (x < 1.0) return 1.0 - node.p;
                return 1.0;
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return x >= node.x ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, Categorical>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.points.size() && node.points[i] <= x; ++i) {
                    acc += node.probs[i];
                }
                return std::min(acc, 1.0);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return normal_cdf(x, node.mu, node.sigma2);
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                if (x <= node.a) return 0.0;
                if (x >= node.b) return 1.0;
                return (x - node.a) / (node.b - node.a);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.components.size(); ++i) {
                    acc += node.weights[i] * cdf(node.components[i], x);
                }
                return std::min(acc, 1.0);
            } else {
                return grid_cdf_value(node, x);
            }
        },
        d.node());
}

double pdf(const Distribution& d, double x) {
    return std::visit(
        [x, &d](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return normal_pdf(x, node.mu, node.sigma2);
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                return (x >= node.a && x <= node.b) ? 1.0 / (node.b - node.a) : 0.0;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.components.size(); ++i) {
                    acc += node.weights[i] * pdf(node.components[i], x);
                }
                return acc;
            } else if constexpr (std::is_same_v<T, GridCdf>) {
                if (node.values.front() > 0.0) {
                    throw Error(ErrorCode::no_density, "grid_cdf carries an atom at its first knot");
                }
                return grid_slope(node, x);
            } else {
                (void)node;
                throw Error(ErrorCode::no_density, d.tag() + " has no Lebesgue density");
            }
        },
        d.node());
}

double point_mass(const Distribution& d, double x) {
    return std::visit(
        [x](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                if (x == 0.0) return 1.0 - node.p;
                if (x == 1.0) return node.p;
                return 0.0;
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return x == node.x ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, Categorical>) {
                auto it = std::lower_bound(node.points.begin(), node.points.end(), x);
                if (it != node.points.end() && *it == x) {
                    return node.probs[static_cast<std::size_t>(it - node.points.begin())];
                }
                return 0.0;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.components.size(); ++i) {
                    acc += node.weights[i] * point_mass(node.components[i], x);
                }
                return acc;
            } else if constexpr (std::is_same_v<T, GridCdf>) {
                return x == node.grid.front() ? node.values.front() : 0.0;
            } else {
                return 0.0;
            }
        },
        d.node());
}

double central_moment(const Distribution& d, double c, int k) {
    if (k < 1 || k > 4) {
        throw Error(ErrorCode::invalid_distribution, "central_moment supports orders 1..4");
    }
    return std::visit(
        [c, k](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            auto ipow = [](double v, int n) {
                double r = 1.0;
                for (int i = 0; i < n; ++i) r *= v;
                return r;
            };
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return (1.0 - node.p) * ipow(-c, k) + node.p * ipow(1.0 - c, k);
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return ipow(node.x - c, k);
            } else if constexpr (std::is_same_v<T, Categorical>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.points.size(); ++i) {
                    acc += node.probs[i] * ipow(node.points[i] - c, k);
                }
                return acc;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                double dlt = node.mu - c;
                double s2 = node.sigma2;
                switch (k) {
                    case 1: return dlt;
                    case 2: return dlt * dlt + s2;
                    case 3: return dlt * dlt * dlt + 3.0 * dlt * s2;
                    default: return ipow(dlt, 4) + 6.0 * dlt * dlt * s2 + 3.0 * s2 * s2;
                }
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                double hi = ipow(node.b - c, k + 1);
                double lo = ipow(node.a - c, k + 1);
                return (hi - lo) / ((k + 1) * (node.b - node.a));
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.components.size(); ++i) {
                    acc += node.weights[i] * central_moment(node.components[i], c, k);
                }
                return acc;
            } else {
                double acc = node.values.front() * ipow(node.grid.front() - c, k);
                for (std::size_t i = 0; i + 1 < node.grid.size(); ++i) {
                    double slope = (node.values[i + 1] - node.values[i]) / (node.grid[i + 1] - node.grid[i]);
                    if (slope == 0.0) continue;
                    acc += slope * (ipow(node.grid[i + 1] - c, k + 1) - ipow(node.grid[i] - c, k + 1)) /
                           (k + 1);
                }
                return acc;
            }
        },
        d.node());
}

Moments moments(const Distribution& d) {
    double mean = central_moment(d, 0.0, 1);
    double variance = std::max(0.0, central_moment(d, mean, 2));
    double third = central_moment(d, mean, 3);
    if (d.is<Dirac>()) {
        variance = 0.0;
        third = 0.0;
    }
    return Moments{mean, variance, third};
}

Interval support_interval(const Distribution& d, double eps) {
    return std::visit(
        [eps](const auto& node) -> Interval {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return {0.0, 1.0};
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return {node.x, node.x};
            } else if constexpr (std::is_same_v<T, Categorical>) {
                return {node.points.front(), node.points.back()};
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                double sigma = std::sqrt(node.sigma2);
                double z = 8.0;
                while (normal_cdf(node.mu - z * sigma, node.mu, node.sigma2) > eps / 2.0 && z < 1e6) {
                    z *= 2.0;
                }
                return {node.mu - z * sigma, node.mu + z * sigma};
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                return {node.a, node.b};
            } else if constexpr (std::is_same_v<T, Mixture>) {
                Interval acc{kInf, -kInf};
                for (const auto& comp : node.components) {
                    Interval ci = support_interval(comp, eps);
                    acc.lo = std::min(acc.lo, ci.lo);
                    acc.hi = std::max(acc.hi, ci.hi);
                }
                return acc;
            } else {
                return {node.grid.front(), node.grid.back()};
            }
        },
        d.node());
}

namespace {

// Regions where the local density falls below this floor are ignored by the
// expectation operator. They carry less mass than the 1e-10 support
// truncation already tolerated everywhere, and skipping them keeps isolated
// infinities of the integrand (log scores against discretized densities whose
// CDF increments underflow) from poisoning an otherwise finite integral.
constexpr double kDensityFloor = 1e-11;

double expectation_impl(const Distribution& d, const std::function<double(double)>& f,
                        double abs_tol, std::span<const double> extra_knots, double floor) {
    return std::visit(
        [&](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                double acc = 0.0;
                if (node.p < 1.0) acc += (1.0 - node.p) * f(0.0);
                if (node.p > 0.0) acc += node.p * f(1.0);
                if (std::isnan(acc)) {
                    throw Error(ErrorCode::quadrature_failure, "conflicting infinite atom contributions");
                }
                return acc;
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return f(node.x);
            } else if constexpr (std::is_same_v<T, Categorical>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.points.size(); ++i) {
                    if (node.probs[i] == 0.0) continue;
                    acc += node.probs[i] * f(node.points[i]);
                }
                if (std::isnan(acc)) {
                    throw Error(ErrorCode::quadrature_failure, "conflicting infinite atom contributions");
                }
                return acc;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                Interval iv = support_interval(Distribution::gaussian(node.mu, node.sigma2), kTailEps);
                auto integrand = [&](double x) {
                    double rho = normal_pdf(x, node.mu, node.sigma2);
                    return rho <= floor ? 0.0 : f(x) * rho;
                };
                return quad::integrate(integrand, iv.lo, iv.hi, quad::Options(abs_tol), extra_knots);
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                double h = 1.0 / (node.b - node.a);
                if (h <= floor) {
                    return 0.0;
                }
                auto integrand = [&](double x) { return f(x) * h; };
                return quad::integrate(integrand, node.a, node.b, quad::Options(abs_tol), extra_knots);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double acc = 0.0;
                for (std::size_t i = 0; i < node.components.size(); ++i) {
                    double w = node.weights[i];
                    acc += w * expectation_impl(node.components[i], f, abs_tol, extra_knots,
                                                std::min(floor / w, 1e-6));
                }
                if (std::isnan(acc)) {
                    throw Error(ErrorCode::quadrature_failure, "conflicting infinite contributions");
                }
                return acc;
            } else {
                double acc = 0.0;
                if (node.values.front() > 0.0) {
                    acc += node.values.front() * f(node.grid.front());
                }
                std::vector<double> knots(node.grid.begin(), node.grid.end());
                knots.insert(knots.end(), extra_knots.begin(), extra_knots.end());
                auto integrand = [&](double x) {
                    double rho = grid_slope(node, x);
                    return rho <= floor ? 0.0 : f(x) * rho;
                };
                acc += quad::integrate(integrand, node.grid.front(), node.grid.back(),
                                       quad::Options(abs_tol), knots);
                if (std::isnan(acc)) {
                    throw Error(ErrorCode::quadrature_failure, "conflicting infinite contributions");
                }
                return acc;
            }
        },
        d.node());
}

} // namespace

double expectation(const Distribution& d, const std::function<double(double)>& f, double abs_tol,
                   std::span<const double> extra_knots) {
    return expectation_impl(d, f, abs_tol, extra_knots, kDensityFloor);
}

Distribution shift(const Distribution& d, double c) {
    if (c == 0.0) {
        return d;
    }
    return std::visit(
        [c](const auto& node) -> Distribution {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return Distribution::categorical({c, 1.0 + c}, {1.0 - node.p, node.p});
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return Distribution::dirac(node.x + c);
            } else if constexpr (std::is_same_v<T, Categorical>) {
                std::vector<double> pts = node.points;
                for (double& x : pts) x += c;
                return Distribution::categorical(std::move(pts), node.probs);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return Distribution::gaussian(node.mu + c, node.sigma2);
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                return Distribution::uniform(node.a + c, node.b + c);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                std::vector<Distribution> comps;
                comps.reserve(node.components.size());
                for (const auto& comp : node.components) {
                    comps.push_back(shift(comp, c));
                }
                return Distribution::mixture(std::move(comps), node.weights);
            } else {
                std::vector<double> grid = node.grid;
                for (double& x : grid) x += c;
                return Distribution::grid_cdf(std::move(grid), node.values);
            }
        },
        d.node());
}

namespace {

Distribution numeric_convolve(const Distribution& d, const Distribution& noise) {
    Interval a = support_interval(d, kTailEps);
    Interval b = support_interval(noise, kTailEps);
    double lo = a.lo + b.lo;
    double hi = a.hi + b.hi;
    if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) {
        throw Error(ErrorCode::unbounded_support, "cannot bound the convolution support");
    }
    const std::size_t n = 2049;
    std::vector<double> grid(n);
    std::vector<double> values(n);
    double step = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> noise_kinks = cdf_knots(noise);
    for (std::size_t i = 0; i < n; ++i) {
        double x = lo + step * static_cast<double>(i);
        grid[i] = x;
        // (d * noise)(x) = E_d[ Noise(x - Y) ]
        std::vector<double> kinks;
        kinks.reserve(noise_kinks.size());
        for (double k : noise_kinks) {
            kinks.push_back(x - k);
        }
        double v = expectation(d, [&](double y) { return cdf(noise, x - y); }, 1e-10, kinks);
        values[i] = std::clamp(v, 0.0, 1.0);
    }
    for (std::size_t i = 1; i < n; ++i) {
        values[i] = std::max(values[i], values[i - 1]);
    }
    if (1.0 - values.back() > kCoverageTol || values.front() > kCoverageTol) {
        throw Error(ErrorCode::unbounded_support, "convolution grid covers too little mass");
    }
    values.back() = 1.0;
    return Distribution::grid_cdf(std::move(grid), std::move(values));
}

} // namespace

Distribution convolve(const Distribution& d, const Distribution& noise) {
    if (d.is<Dirac>()) {
        return shift(noise, d.as<Dirac>().x);
    }
    if (noise.is<Dirac>()) {
        return shift(d, noise.as<Dirac>().x);
    }
    if (d.is<Gaussian>() && noise.is<Gaussian>()) {
        const auto& g1 = d.as<Gaussian>();
        const auto& g2 = noise.as<Gaussian>();
        return Distribution::gaussian(g1.mu + g2.mu, g1.sigma2 + g2.sigma2);
    }
    if (d.is<Mixture>()) {
        const auto& mix = d.as<Mixture>();
        std::vector<Distribution> comps;
        comps.reserve(mix.components.size());
        for (const auto& comp : mix.components) {
            comps.push_back(convolve(comp, noise));
        }
        return Distribution::mixture(std::move(comps), mix.weights);
    }
    if (noise.is<Mixture>()) {
        const auto& mix = noise.as<Mixture>();
        std::vector<Distribution> comps;
        comps.reserve(mix.components.size());
        for (const auto& comp : mix.components) {
            comps.push_back(convolve(d, comp));
        }
        return Distribution::mixture(std::move(comps), mix.weights);
    }
    auto atoms_as_mixture = [](const Distribution& dist) -> std::optional<std::pair<std::vector<double>, std::vector<double>>> {
        if (dist.is<Bernoulli>()) {
            double p = dist.as<Bernoulli>().p;
            return std::make_pair(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0 - p, p});
        }
        if (dist.is<Categorical>()) {
            const auto& cat = dist.as<Categorical>();
            return std::make_pair(cat.points, cat.probs);
        }
        return std::nullopt;
    };
    if (auto atoms = atoms_as_mixture(d)) {
        std::vector<Distribution> comps;
        std::vector<double> weights;
        for (std::size_t i = 0; i < atoms->first.size(); ++i) {
            if (atoms->second[i] == 0.0) continue;
            comps.push_back(shift(noise, atoms->first[i]));
            weights.push_back(atoms->second[i]);
        }
        double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) w /= sum;
        return Distribution::mixture(std::move(comps), std::move(weights));
    }
    if (auto atoms = atoms_as_mixture(noise)) {
        std::vector<Distribution> comps;
        std::vector<double> weights;
        for (std::size_t i = 0; i < atoms->first.size(); ++i) {
            if (atoms->second[i] == 0.0) continue;
            comps.push_back(shift(d, atoms->first[i]));
            weights.push_back(atoms->second[i]);
        }
        double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) w /= sum;
        return Distribution::mixture(std::move(comps), std::move(weights));
    }
    return numeric_convolve(d, noise);
}

std::vector<double> atom_points(const Distribution& d) {
    std::vector<double> out;
    std::visit(
        [&out](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                out = {0.0, 1.0};
            } else if constexpr (std::is_same_v<T, Dirac>) {
                out = {node.x};
            } else if constexpr (std::is_same_v<T, Categorical>) {
                out = node.points;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                for (const auto& comp : node.components) {
                    auto sub = atom_points(comp);
                    out.insert(out.end(), sub.begin(), sub.end());
                }
            } else if constexpr (std::is_same_v<T, GridCdf>) {
                if (node.values.front() > 0.0) {
                    out = {node.grid.front()};
                }
            }
        },
        d.node());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> cdf_knots(const Distribution& d) {
    std::vector<double> out;
    std::visit(
        [&out](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                out = {0.0, 1.0};
            } else if constexpr (std::is_same_v<T, Dirac>) {
                out = {node.x};
            } else if constexpr (std::is_same_v<T, Categorical>) {
                out = node.points;
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                out = {node.a, node.b};
            } else if constexpr (std::is_same_v<T, Mixture>) {
                for (const auto& comp : node.components) {
                    auto sub = cdf_knots(comp);
                    out.insert(out.end(), sub.begin(), sub.end());
                }
            } else if constexpr (std::is_same_v<T, GridCdf>) {
                out = node.grid;
            }
        },
        d.node());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

// inf{x : pred(cdf(x))} via bisection with atom snapping; pred is monotone in x.
double cdf_threshold(const Distribution& d, const std::function<bool(double)>& pred) {
    Interval iv = support_interval(d, 1e-13);
    if (pred(cdf(d, iv.lo))) {
        return iv.lo;
    }
    double lo = iv.lo;
    double hi = iv.hi;
    if (!pred(cdf(d, hi))) {
        hi = iv.hi + 1.0; // right of all mass; cdf is 1 there up to tail eps
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        double mid = 0.5 * (lo + hi);
        if (pred(cdf(d, mid))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Snap to an atom if the threshold is crossed by a jump there.
    for (double a : atom_points(d)) {
        if (std::abs(a - hi) <= 1e-9 * std::max(1.0, std::abs(a)) && pred(cdf(d, a))) {
            return a;
        }
    }
    return hi;
}

} // namespace

Interval median_interval(const Distribution& d) {
    if (d.is<Gaussian>()) {
        return {d.as<Gaussian>().mu, d.as<Gaussian>().mu};
    }
    if (d.is<Dirac>()) {
        return {d.as<Dirac>().x, d.as<Dirac>().x};
    }
    if (d.is<UniformInterval>()) {
        const auto& u = d.as<UniformInterval>();
        double m = 0.5 * (u.a + u.b);
        return {m, m};
    }
    double lower = cdf_threshold(d, [](double v) { return v >= 0.5; });
    double upper = cdf_threshold(d, [](double v) { return v > 0.5; });
    return {lower, std::max(lower, upper)};
}

double median(const Distribution& d) {
    return median_interval(d).lo;
}

GridCdf discretize(const Distribution& d, std::vector<double> grid) {
    if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end())) {
        throw Error(ErrorCode::invalid_distribution, "discretization grid must be ascending");
    }
    double below = cdf(d, grid.front()) - point_mass(d, grid.front());
    double above = 1.0 - cdf(d, grid.back());
    if (below > kCoverageTol || above > kCoverageTol) {
        throw Error(ErrorCode::unbounded_support, "grid covers less than 1 - 1e-10 of the mass");
    }
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        values[i] = cdf(d, grid[i]);
    }
    values.back() = 1.0;
    return Distribution::grid_cdf(std::move(grid), std::move(values)).as<GridCdf>();
}

double sup_cdf_distance(const Distribution& a, const Distribution& b, std::size_t grid_points) {
    Interval ia = support_interval(a, kTailEps);
    Interval ib = support_interval(b, kTailEps);
    double lo = std::min(ia.lo, ib.lo);
    double hi = std::max(ia.hi, ib.hi);
    if (hi <= lo) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    std::vector<double> xs;
    xs.reserve(grid_points + 64);
    double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t i = 0; i < grid_points; ++i) {
        xs.push_back(lo + step * static_cast<double>(i));
    }
    for (const Distribution* d : {&a, &b}) {
        auto knots = cdf_knots(*d);
        if (knots.size() > 2048) {
            continue; // dense grids are already covered by the uniform sweep
        }
        for (double k : knots) {
            xs.push_back(k);
            xs.push_back(k - 1e-12 * std::max(1.0, std::abs(k)));
        }
    }
    double worst = 0.0;
    for (double x : xs) {
        worst = std::max(worst, std::abs(cdf(a, x) - cdf(b, x)));
    }
    return worst;
}

} // namespace properize
