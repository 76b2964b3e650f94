#include "properize/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "properize/quadrature.hpp"

namespace properize {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double sq(double v) { return v * v; }

Score make_score(double v, InfinityReason why_if_inf = InfinityReason::divergent_integral) {
    if (std::isnan(v)) {
        throw Error(ErrorCode::quadrature_failure, "score evaluated to NaN");
    }
    if (std::isinf(v)) {
        return Score::infinite(v, why_if_inf);
    }
    return Score::finite(v);
}

// Bernoulli success probability of a binary forecast; Dirac masses at 0 or 1
// are accepted as the degenerate members of the Bernoulli family.
double binary_prob(const Distribution& d) {
    if (d.is<Bernoulli>()) {
        return d.as<Bernoulli>().p;
    }
    if (d.is<Dirac>()) {
        double x = d.as<Dirac>().x;
        if (x == 0.0 || x == 1.0) {
            return x;
        }
    }
    throw Error(ErrorCode::incompatible_rule, "binary rules need a Bernoulli forecast");
}

int binary_outcome(double y) {
    if (y == 0.0) return 0;
    if (y == 1.0) return 1;
    throw Error(ErrorCode::incompatible_rule, "binary outcomes must be 0 or 1");
}

bool has_density(const Distribution& d) {
    if (d.is<Gaussian>() || d.is<UniformInterval>()) {
        return true;
    }
    if (d.is<GridCdf>()) {
        return d.as<GridCdf>().values.front() == 0.0;
    }
    if (d.is<Mixture>()) {
        const auto& mix = d.as<Mixture>();
        return std::all_of(mix.components.begin(), mix.components.end(),
                           [](const Distribution& c) { return has_density(c); });
    }
    return false;
}

void require_density(const Distribution& d, const char* rule_name) {
    if (!has_density(d)) {
        throw Error(ErrorCode::incompatible_rule,
                    std::string(rule_name) + " needs a forecast with a Lebesgue density");
    }
}

Moments positive_variance_moments(const Distribution& d, const char* rule_name) {
    Moments m = moments(d);
    if (!(m.variance > 0.0)) {
        throw Error(ErrorCode::degenerate_forecast,
                    std::string(rule_name) + " needs a forecast with positive variance");
    }
    return m;
}

double weight_mass(const Distribution& d, const WeightSpec& w) {
    return std::visit(
        [&d](const auto& spec) -> double {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, IndicatorAbove>) {
                return 1.0 - cdf(d, spec.r);
            } else {
                return cdf(d, spec.b) - cdf(d, spec.a);
            }
        },
        w.spec);
}

double check_weight_mass(const Distribution& d, const WeightSpec& w) {
    double z = weight_mass(d, w);
    if (!(z > 0.0)) {
        throw Error(ErrorCode::weight_mass_zero, "forecast places no mass on the weight region");
    }
    return z;
}

std::vector<double> weight_knots(const WeightSpec& w) {
    return std::visit(
        [](const auto& spec) -> std::vector<double> {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, IndicatorAbove>) {
                return {spec.r};
            } else {
                return {spec.a, spec.b};
            }
        },
        w.spec);
}

// Mass-eps for the truncation of CRPS_alpha integrals: the tail integrand is
// F^alpha, so the cutoff must shrink like eps^(1/alpha) for alpha < 1.
double crps_tail_eps(double alpha) {
    if (alpha >= 1.0) {
        return 1e-12;
    }
    return std::max(std::pow(1e-12, 1.0 / alpha), 1e-300);
}

double crps_alpha_pointwise(double alpha, const Distribution& forecast, double y) {
    if (forecast.is<Dirac>()) {
        // The integrand is exactly 1 between the point mass and y.
        return std::abs(forecast.as<Dirac>().x - y);
    }
    Interval iv = support_interval(forecast, crps_tail_eps(alpha));
    double lo = std::min(iv.lo, y);
    double hi = std::max(iv.hi, y);
    std::vector<double> knots = cdf_knots(forecast);
    knots.push_back(y);
    auto integrand = [&](double x) {
        double v = cdf(forecast, x);
        return x < y ? std::pow(v, alpha) : std::pow(1.0 - v, alpha);
    };
    return quad::integrate(integrand, lo, hi, quad::Options(), knots);
}

// Fubini form of the expected CRPS_alpha:
//   integral of Q(x) (1 - P(x))^alpha + (1 - Q(x)) P(x)^alpha dx.
double crps_alpha_expected(double alpha, const Distribution& forecast, const Distribution& truth) {
    double eps = crps_tail_eps(alpha);
    Interval ip = support_interval(forecast, eps);
    Interval iq = support_interval(truth, eps);
    double lo = std::min(ip.lo, iq.lo);
    double hi = std::max(ip.hi, iq.hi);
    if (hi <= lo) {
        return 0.0;
    }
    std::vector<double> knots = cdf_knots(forecast);
    std::vector<double> qk = cdf_knots(truth);
    knots.insert(knots.end(), qk.begin(), qk.end());
    auto integrand = [&](double x) {
        double p = cdf(forecast, x);
        double q = cdf(truth, x);
        return q * std::pow(1.0 - p, alpha) + (1.0 - q) * std::pow(p, alpha);
    };
    return quad::integrate(integrand, lo, hi, quad::Options(), knots);
}

double noisy_crps_pointwise(const Distribution& forecast, const Distribution& noise, double y) {
    Interval ip = support_interval(forecast, 1e-12);
    Interval in = support_interval(noise, 1e-12);
    double lo = std::min(ip.lo, in.lo + y);
    double hi = std::max(ip.hi, in.hi + y);
    std::vector<double> knots = cdf_knots(forecast);
    for (double k : cdf_knots(noise)) {
        knots.push_back(k + y);
    }
    auto integrand = [&](double x) { return sq(cdf(forecast, x) - cdf(noise, x - y)); };
    return quad::integrate(integrand, lo, hi, quad::Options(), knots);
}

} // namespace

WeightSpec WeightSpec::interval(double a, double b) {
    if (!(a < b)) {
        throw Error(ErrorCode::invalid_rule, "indicator interval needs a < b");
    }
    return {IndicatorInterval{a, b}};
}

double WeightSpec::operator()(double y) const {
    return std::visit(
        [y](const auto& spec) -> double {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, IndicatorAbove>) {
                return y >= spec.r ? 1.0 : 0.0;
            } else {
                return (y >= spec.a && y <= spec.b) ? 1.0 : 0.0;
            }
        },
        spec);
}

ScoringRule ScoringRule::crps_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::invalid_rule, "crps_alpha needs alpha > 0");
    }
    return ScoringRule(CrpsAlpha{alpha});
}

ScoringRule ScoringRule::weighted(ScoringRule base, WeightSpec weight) {
    if (!base.is<LogScore>() && !base.is<CrpsAlpha>()) {
        throw Error(ErrorCode::invalid_rule, "weighted base must be the log score or a crps_alpha score");
    }
    return ScoringRule(Weighted{std::make_shared<const ScoringRule>(std::move(base)), weight});
}

ScoringRule ScoringRule::probability_score(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw Error(ErrorCode::invalid_rule, "probability_score needs c > 0");
    }
    return ScoringRule(ProbabilityScore{c});
}

ScoringRule ScoringRule::noisy_crps(Distribution noise) {
    if (noise.is<Dirac>()) {
        throw Error(ErrorCode::invalid_rule, "noisy_crps noise must not be a point mass");
    }
    return ScoringRule(NoisyCrps{std::move(noise)});
}

ScoringRule ScoringRule::convolution_score(ScoringRule base, Distribution noise) {
    if (!has_density(noise)) {
        throw Error(ErrorCode::invalid_rule, "convolution_score noise needs a Lebesgue density");
    }
    return ScoringRule(
        ConvolutionScore{std::make_shared<const ScoringRule>(std::move(base)), std::move(noise)});
}

std::string ScoringRule::tag() const {
    return std::visit(
        [](const auto& node) -> std::string {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Mpr>) return "mpr";
            else if constexpr (std::is_same_v<T, MaeBinary>) return "mae_binary";
            else if constexpr (std::is_same_v<T, ZeroOne>) return "zero_one";
            else if constexpr (std::is_same_v<T, Brier>) return "brier";
            else if constexpr (std::is_same_v<T, LogScore>) return "log";
            else if constexpr (std::is_same_v<T, CrpsAlpha>) return "crps_alpha";
            else if constexpr (std::is_same_v<T, Weighted>) return "weighted";
            else if constexpr (std::is_same_v<T, TrialScore>) return "trial_score";
            else if constexpr (std::is_same_v<T, SpreadError>) return "spread_error";
            else if constexpr (std::is_same_v<T, Pmcc>) return "pmcc";
            else if constexpr (std::is_same_v<T, SquaredError>) return "squared_error";
            else if constexpr (std::is_same_v<T, NormalizedSquaredError>) return "normalized_squared_error";
            else if constexpr (std::is_same_v<T, LinearScore>) return "linear_score";
            else if constexpr (std::is_same_v<T, ProbabilityScore>) return "probability_score";
            else if constexpr (std::is_same_v<T, NoisyCrps>) return "noisy_crps";
            else return "convolution_score";
        },
        node_);
}

bool is_proper(const ScoringRule& rule) {
    if (rule.is<ZeroOne>() || rule.is<Brier>() || rule.is<LogScore>() || rule.is<SquaredError>() ||
        rule.is<SpreadError>()) {
        return true;
    }
    if (rule.is<CrpsAlpha>()) {
        return rule.as<CrpsAlpha>().alpha == 2.0;
    }
    return false;
}

bool is_strictly_proper(const ScoringRule& rule) {
    if (rule.is<Brier>() || rule.is<LogScore>()) {
        return true;
    }
    if (rule.is<CrpsAlpha>()) {
        return rule.as<CrpsAlpha>().alpha == 2.0;
    }
    return false;
}

Score Score::finite(double v) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::quadrature_failure, "expected a finite score value");
    }
    return Score{v, InfinityReason::none};
}

Score Score::infinite(double signed_inf, InfinityReason why) {
    Score s;
    s.value = signed_inf > 0 ? kInf : -kInf;
    s.reason = why;
    return s;
}

Score score(const ScoringRule& rule, const Distribution& forecast, double y) {
    return std::visit(
        [&](const auto& node) -> Score {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Mpr>) {
                double p = binary_prob(forecast);
                int w = binary_outcome(y);
                return make_score(1.0 - p * w - (1.0 - p) * (1 - w));
            } else if constexpr (std::is_same_v<T, MaeBinary>) {
                double p = binary_prob(forecast);
                int w = binary_outcome(y);
                return make_score(std::abs(p - w));
            } else if constexpr (std::is_same_v<T, ZeroOne>) {
                double p = binary_prob(forecast);
                int w = binary_outcome(y);
                int mode = p >= 0.5 ? 1 : 0;
                return make_score(mode == w ? 0.0 : 1.0);
            } else if constexpr (std::is_same_v<T, Brier>) {
                double p = binary_prob(forecast);
                int w = binary_outcome(y);
                return make_score(sq(p - w));
            } else if constexpr (std::is_same_v<T, LogScore>) {
                if (forecast.is<Bernoulli>() || forecast.is<Dirac>()) {
                    double p = binary_prob(forecast);
                    int w = binary_outcome(y);
                    double mass = w ? p : 1.0 - p;
                    if (mass == 0.0) {
                        return Score::infinite(kInf, InfinityReason::zero_density);
                    }
                    return make_score(-std::log(mass));
                }
                require_density(forecast, "log score");
                double dens = pdf(forecast, y);
                if (dens == 0.0) {
                    return Score::infinite(kInf, InfinityReason::zero_density);
                }
                return make_score(-std::log(dens));
            } else if constexpr (std::is_same_v<T, CrpsAlpha>) {
                return make_score(crps_alpha_pointwise(node.alpha, forecast, y));
            } else if constexpr (std::is_same_v<T, Weighted>) {
                require_density(forecast, "weighted score");
                check_weight_mass(forecast, node.weight);
                double w = node.weight(y);
                if (w == 0.0) {
                    return Score::finite(0.0);
                }
                Score base = score(*node.base, forecast, y);
                return Score{w * base.value, base.reason};
            } else if constexpr (std::is_same_v<T, TrialScore>) {
                Moments m = positive_variance_moments(forecast, "trial score");
                return make_score(sq(m.variance - sq(y - m.mean)));
            } else if constexpr (std::is_same_v<T, SpreadError>) {
                Moments m = positive_variance_moments(forecast, "spread-error score");
                double dev = y - m.mean;
                return make_score(sq(m.variance - sq(dev) + dev * m.third_central / m.variance));
            } else if constexpr (std::is_same_v<T, Pmcc>) {
                Moments m = moments(forecast);
                return make_score(sq(y - m.mean) + m.variance);
            } else if constexpr (std::is_same_v<T, SquaredError>) {
                Moments m = moments(forecast);
                return make_score(sq(y - m.mean));
            } else if constexpr (std::is_same_v<T, NormalizedSquaredError>) {
                Moments m = positive_variance_moments(forecast, "normalized squared error");
                return make_score(sq(y - m.mean) / m.variance);
            } else if constexpr (std::is_same_v<T, LinearScore>) {
                require_density(forecast, "linear score");
                return make_score(-pdf(forecast, y));
            } else if constexpr (std::is_same_v<T, ProbabilityScore>) {
                require_density(forecast, "probability score");
                return make_score(-(cdf(forecast, y + node.c) - cdf(forecast, y - node.c)));
            } else if constexpr (std::is_same_v<T, NoisyCrps>) {
                return make_score(noisy_crps_pointwise(forecast, node.noise, y));
            } else {
                // E_noise[ S_base(P, y + Z) ]
                std::vector<double> knots;
                auto fk = cdf_knots(forecast);
                if (fk.size() <= 2048) {
                    for (double k : fk) {
                        knots.push_back(k - y);
                    }
                }
                double v = expectation(
                    node.noise, [&](double z) { return score(*node.base, forecast, y + z).value; },
                    quad::default_tolerance(), knots);
                return make_score(v);
            }
        },
        rule.node());
}

Score expected_score(const ScoringRule& rule, const Distribution& forecast,
                     const Distribution& truth) {
    return std::visit(
        [&](const auto& node) -> Score {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Mpr> || std::is_same_v<T, MaeBinary> ||
                          std::is_same_v<T, ZeroOne> || std::is_same_v<T, Brier>) {
                double q = binary_prob(truth);
                Score s0 = score(rule, forecast, 0.0);
                Score s1 = score(rule, forecast, 1.0);
                return make_score((1.0 - q) * s0.value + q * s1.value);
            } else if constexpr (std::is_same_v<T, SquaredError>) {
                Moments mp = moments(forecast);
                return make_score(central_moment(truth, mp.mean, 2));
            } else if constexpr (std::is_same_v<T, Pmcc>) {
                Moments mp = moments(forecast);
                return make_score(central_moment(truth, mp.mean, 2) + mp.variance);
            } else if constexpr (std::is_same_v<T, NormalizedSquaredError>) {
                Moments mp = positive_variance_moments(forecast, "normalized squared error");
                return make_score(central_moment(truth, mp.mean, 2) / mp.variance);
            } else if constexpr (std::is_same_v<T, TrialScore>) {
                Moments mp = positive_variance_moments(forecast, "trial score");
                double m2 = central_moment(truth, mp.mean, 2);
                double m4 = central_moment(truth, mp.mean, 4);
                return make_score(sq(mp.variance) - 2.0 * mp.variance * m2 + m4);
            } else if constexpr (std::is_same_v<T, SpreadError>) {
                Moments mp = positive_variance_moments(forecast, "spread-error score");
                double a = mp.variance;
                double b = mp.third_central / mp.variance;
                double m1 = central_moment(truth, mp.mean, 1);
                double m2 = central_moment(truth, mp.mean, 2);
                double m3 = central_moment(truth, mp.mean, 3);
                double m4 = central_moment(truth, mp.mean, 4);
                return make_score(a * a + m4 + b * b * m2 - 2.0 * a * m2 + 2.0 * a * b * m1 -
                                  2.0 * b * m3);
            } else if constexpr (std::is_same_v<T, CrpsAlpha>) {
                return make_score(crps_alpha_expected(node.alpha, forecast, truth));
            } else if constexpr (std::is_same_v<T, LogScore>) {
                if (truth.is<Bernoulli>() || truth.is<Dirac>()) {
                    if (forecast.is<Bernoulli>() ||
                        (forecast.is<Dirac>() &&
                         (forecast.as<Dirac>().x == 0.0 || forecast.as<Dirac>().x == 1.0))) {
                        double q = binary_prob(truth);
                        double s0 = q < 1.0 ? score(rule, forecast, 0.0).value : 0.0;
                        double s1 = q > 0.0 ? score(rule, forecast, 1.0).value : 0.0;
                        return make_score((1.0 - q) * s0 + q * s1, InfinityReason::zero_density);
                    }
                }
                require_density(forecast, "log score");
                std::vector<double> knots = cdf_knots(forecast);
                double v = expectation(
                    truth, [&](double w) { return score(rule, forecast, w).value; },
                    quad::default_tolerance(), knots);
                return make_score(v, InfinityReason::zero_density);
            } else if constexpr (std::is_same_v<T, Weighted>) {
                require_density(forecast, "weighted score");
                check_weight_mass(forecast, node.weight);
                std::vector<double> knots = weight_knots(node.weight);
                auto fk = cdf_knots(forecast);
                if (fk.size() <= 4096) {
                    knots.insert(knots.end(), fk.begin(), fk.end());
                }
                double v = expectation(
                    truth, [&](double w) { return score(rule, forecast, w).value; },
                    quad::default_tolerance(), knots);
                return make_score(v, InfinityReason::zero_density);
            } else {
                std::vector<double> knots;
                if constexpr (std::is_same_v<T, LinearScore> || std::is_same_v<T, ProbabilityScore>) {
                    require_density(forecast, "density score");
                    knots = cdf_knots(forecast);
                    if constexpr (std::is_same_v<T, ProbabilityScore>) {
                        std::vector<double> shifted;
                        for (double k : knots) {
                            shifted.push_back(k - node.c);
                            shifted.push_back(k + node.c);
                        }
                        knots = std::move(shifted);
                    }
                }
                double v = expectation(
                    truth, [&](double w) { return score(rule, forecast, w).value; },
                    quad::default_tolerance(), knots);
                return make_score(v);
            }
        },
        rule.node());
}

double crps_self(const Distribution& noise) {
    Interval iv = support_interval(noise, 1e-12);
    if (iv.hi <= iv.lo) {
        return 0.0;
    }
    std::vector<double> knots = cdf_knots(noise);
    auto integrand = [&](double x) {
        double v = cdf(noise, x);
        return v * (1.0 - v);
    };
    return quad::integrate(integrand, iv.lo, iv.hi, quad::Options(), knots);
}

} // namespace properize
