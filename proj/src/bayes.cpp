#include "properize/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "properize/quadrature.hpp"

namespace properize {

namespace {

constexpr std::size_t kWeightedActKnots = 40001;
constexpr std::size_t kCrpsActKnots = 4001;
constexpr int kCertificateLength = 8;

double sq(double v) { return v * v; }

BayesActResult make_act(Distribution act, bool unique, std::string note = {}) {
    BayesActResult r;
    r.act = BayesAct{std::move(act), unique, std::move(note)};
    return r;
}

BayesActResult make_no_act(DescentCertificate cert) {
    BayesActResult r;
    r.no_act = std::move(cert);
    return r;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n,
                                 std::span<const double> extra = {}) {
    std::vector<double> grid;
    grid.reserve(n + extra.size());
    double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        grid.push_back(lo + step * static_cast<double>(i));
    }
    grid.back() = hi;
    for (double k : extra) {
        if (k > lo && k < hi) {
            grid.push_back(k);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

Distribution grid_cdf_from_values(std::vector<double> grid, std::vector<double> values) {
    values.front() = std::max(values.front(), 0.0);
    for (std::size_t i = 1; i < values.size(); ++i) {
        values[i] = std::clamp(std::max(values[i], values[i - 1]), 0.0, 1.0);
    }
    values.back() = 1.0;
    return Distribution::grid_cdf(std::move(grid), std::move(values));
}

Moments belief_moments_positive_variance(const Distribution& belief, const char* rule_name) {
    Moments m = moments(belief);
    if (!(m.variance > 0.0)) {
        throw Error(ErrorCode::degenerate_forecast,
                    std::string(rule_name) + " needs a belief with positive variance");
    }
    return m;
}

// Reweighted-density Bayes act for weighted proper scores: the act's CDF is
// the belief's CDF restricted to the weight region and renormalized.
BayesActResult weighted_bayes_act(const Weighted& node, const Distribution& belief) {
    if (node.base->is<CrpsAlpha>() && node.base->as<CrpsAlpha>().alpha != 2.0) {
        throw Error(ErrorCode::incompatible_rule,
                    "the reweighted-density Bayes act needs a proper base score");
    }
    // The grid reaches slightly past the expectation operator's truncation so
    // that log scores never see the act run out of support before the belief.
    Interval iv = support_interval(belief, 1e-13);
    double lo;
    double hi;
    double mass_lo;
    double z;
    if (std::holds_alternative<IndicatorAbove>(node.weight.spec)) {
        double r = std::get<IndicatorAbove>(node.weight.spec).r;
        lo = r;
        hi = std::max(iv.hi, r + 1e-6);
        mass_lo = cdf(belief, r);
        z = 1.0 - mass_lo;
    } else {
        const auto& w = std::get<IndicatorInterval>(node.weight.spec);
        lo = std::max(iv.lo, w.a);
        hi = std::min(iv.hi, w.b);
        mass_lo = cdf(belief, w.a);
        z = cdf(belief, w.b) - mass_lo;
        if (!(hi > lo)) {
            throw Error(ErrorCode::weight_mass_zero, "forecast places no mass on the weight region");
        }
    }
    if (!(z > 0.0)) {
        throw Error(ErrorCode::weight_mass_zero, "forecast places no mass on the weight region");
    }
    std::vector<double> extra = cdf_knots(belief);
    if (extra.size() > 4096) {
        extra.clear();
    }
    std::vector<double> grid = uniform_grid(lo, hi, kWeightedActKnots, extra);
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        values[i] = (cdf(belief, grid[i]) - mass_lo) / z;
    }
    values.front() = 0.0;
    return make_act(grid_cdf_from_values(std::move(grid), std::move(values)), true);
}

BayesActResult crps_alpha_bayes_act(double alpha, const Distribution& belief,
                                    const FamilyDescriptor& family) {
    if (alpha == 2.0) {
        return make_act(belief, true);
    }
    if (alpha <= 1.0) {
        Interval med = median_interval(belief);
        bool plateau = med.hi - med.lo > 1e-9 * std::max(1.0, std::abs(med.lo));
        bool unique = alpha < 1.0 && !plateau;
        return make_act(Distribution::dirac(med.lo), unique);
    }
    std::string note;
    if (alpha > 2.0 && family.tag != FamilyTag::compact_support) {
        note = "strict propriety for exponents above 2 is ensured only on compactly supported classes";
    }
    if (belief.is<Dirac>()) {
        return make_act(belief, true, note); // CDF in {0,1}: the transform is the identity
    }
    std::vector<double> extra = cdf_knots(belief);
    if (extra.size() > 8192) {
        extra.clear();
    }
    Interval iv = support_interval(belief, 1e-12);
    std::vector<double> grid = uniform_grid(iv.lo, iv.hi, kCrpsActKnots, extra);
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        values[i] = crps_alpha_act_cdf(cdf(belief, grid[i]), alpha);
    }
    return make_act(grid_cdf_from_values(std::move(grid), std::move(values)), true, note);
}

DescentCertificate variance_descent_certificate(const ScoringRule& rule, const Distribution& belief,
                                                double mean, double start_variance, double factor,
                                                const std::string& direction) {
    DescentCertificate cert;
    cert.direction = direction;
    double v = start_variance;
    for (int k = 0; k < kCertificateLength; ++k) {
        Distribution q = Distribution::gaussian(mean, v);
        cert.sequence.emplace_back(q, expected_score_value(rule, q, belief));
        v *= factor;
    }
    return cert;
}

double gaussian_like_center(const Distribution& belief, const char* rule_name) {
    if (!belief.is<Gaussian>()) {
        throw Error(ErrorCode::invalid_shape,
                    std::string(rule_name) +
                        ": the descent construction needs a symmetric, strictly unimodal belief");
    }
    return belief.as<Gaussian>().mu;
}

DescentCertificate mass_shift_certificate(const ScoringRule& rule, const Distribution& belief,
                                          double center) {
    double sigma = std::sqrt(moments(belief).variance);
    double epsilon = 0.35 * sigma;
    auto forecasts = linear_descent_forecasts(belief, center, epsilon, kCertificateLength - 1);
    DescentCertificate cert;
    cert.direction = "mass shift into modal interval";
    for (const auto& f : forecasts) {
        cert.sequence.emplace_back(f, expected_score_value(rule, f, belief));
    }
    return cert;
}

} // namespace

double crps_alpha_act_cdf(double v, double alpha) {
    if (!(v > 0.0)) {
        return 0.0;
    }
    if (v >= 1.0) {
        return 1.0;
    }
    return 1.0 / (1.0 + std::pow((1.0 - v) / v, 1.0 / (alpha - 1.0)));
}

double expected_score_value(const ScoringRule& rule, const Distribution& forecast,
                            const Distribution& belief) {
    return expected_score(rule, forecast, belief).value;
}

std::vector<Distribution> linear_descent_forecasts(const Distribution& belief, double center,
                                                   double epsilon, int steps) {
    if (!(epsilon > 0.0) || steps < 1) {
        throw Error(ErrorCode::invalid_shape, "descent needs epsilon > 0 and at least one step");
    }
    Interval iv = support_interval(belief, 1e-12);
    auto q = [&](double x) { return cdf(belief, x); };
    double a0 = center - epsilon;
    double b0 = center + epsilon;

    std::vector<double> boundaries;
    for (int i = 0; i <= steps; ++i) {
        boundaries.push_back(center + (2 * i - 1) * epsilon);
        boundaries.push_back(center + (2 * i + 1) * epsilon);
    }
    double lo = std::min(iv.lo, a0 - epsilon);
    double hi = std::max(iv.hi, boundaries.back() + epsilon);
    std::vector<double> grid = uniform_grid(lo, hi, 4001, boundaries);

    std::vector<Distribution> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(belief);
    for (int j = 1; j <= steps; ++j) {
        std::vector<double> values(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double x = grid[g];
            double v = q(x);
            for (int i = 1; i <= j; ++i) {
                double ai = center + (2 * i - 1) * epsilon;
                double bi = center + (2 * i + 1) * epsilon;
                // mass removed from (ai, bi] up to x
                v -= q(std::clamp(x, ai, bi)) - q(ai);
                // the same mass re-inserted on (a0, b0], translated left
                if (x >= a0) {
                    v += q(std::min(x, b0) + 2.0 * i * epsilon) - q(ai);
                }
            }
            values[g] = v;
        }
        values.front() = 0.0;
        out.push_back(grid_cdf_from_values(grid, std::move(values)));
    }
    return out;
}

BayesActResult bayes_act(const ScoringRule& rule, const Distribution& belief,
                         const FamilyDescriptor& family) {
    return std::visit(
        [&](const auto& node) -> BayesActResult {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Mpr> || std::is_same_v<T, MaeBinary>) {
                double p;
                if (belief.is<Bernoulli>()) {
                    p = belief.as<Bernoulli>().p;
                } else if (belief.is<Dirac>() &&
                           (belief.as<Dirac>().x == 0.0 || belief.as<Dirac>().x == 1.0)) {
                    p = belief.as<Dirac>().x;
                } else {
                    throw Error(ErrorCode::incompatible_rule, "binary rules need a Bernoulli belief");
                }
                double point = p >= 0.5 ? 1.0 : 0.0;
                return make_act(Distribution::dirac(point), p != 0.5);
            } else if constexpr (std::is_same_v<T, ZeroOne> || std::is_same_v<T, Brier> ||
                                 std::is_same_v<T, LogScore> || std::is_same_v<T, SquaredError> ||
                                 std::is_same_v<T, SpreadError>) {
                return make_act(belief, is_strictly_proper(rule));
            } else if constexpr (std::is_same_v<T, CrpsAlpha>) {
                return crps_alpha_bayes_act(node.alpha, belief, family);
            } else if constexpr (std::is_same_v<T, Weighted>) {
                return weighted_bayes_act(node, belief);
            } else if constexpr (std::is_same_v<T, TrialScore>) {
                Moments m = belief_moments_positive_variance(belief, "trial score");
                double mean = m.mean + 0.5 * m.third_central / m.variance;
                double var = m.variance *
                             (1.0 + 0.25 * sq(m.third_central) / (m.variance * m.variance * m.variance));
                return make_act(Distribution::gaussian(mean, var), false);
            } else if constexpr (std::is_same_v<T, Pmcc>) {
                Moments m = moments(belief);
                return make_act(Distribution::dirac(m.mean), true);
            } else if constexpr (std::is_same_v<T, NormalizedSquaredError>) {
                Moments m = belief_moments_positive_variance(belief, "normalized squared error");
                if (family.tag == FamilyTag::variance_capped) {
                    if (m.variance > family.param + 1e-9) {
                        throw Error(ErrorCode::incompatible_rule,
                                    "belief variance exceeds the family cap");
                    }
                    return make_act(Distribution::gaussian(m.mean, family.param), false);
                }
                return make_no_act(variance_descent_certificate(rule, belief, m.mean, m.variance, 2.0,
                                                                "variance doubling"));
            } else if constexpr (std::is_same_v<T, NoisyCrps>) {
                return make_act(convolve(belief, node.noise), true);
            } else if constexpr (std::is_same_v<T, ConvolutionScore>) {
                if (is_proper(*node.base)) {
                    return make_act(convolve(belief, node.noise), is_strictly_proper(*node.base));
                }
                if (node.base->template is<LinearScore>()) {
                    double center = gaussian_like_center(belief, "smoothed linear score");
                    double noise_mean = moments(node.noise).mean;
                    return make_no_act(mass_shift_certificate(rule, belief, center + noise_mean));
                }
                throw Error(ErrorCode::incompatible_rule,
                            "no closed-form Bayes act for a convolution score with this base");
            } else if constexpr (std::is_same_v<T, LinearScore>) {
                double center = gaussian_like_center(belief, "linear score");
                return make_no_act(mass_shift_certificate(rule, belief, center));
            } else {
                static_assert(std::is_same_v<T, ProbabilityScore>);
                double center = gaussian_like_center(belief, "probability score");
                return make_no_act(mass_shift_certificate(rule, belief, center));
            }
        },
        rule.node());
}

Score properized_score(const ScoringRule& rule, const Distribution& forecast, double y,
                       const FamilyDescriptor& family) {
    // Closed forms of the properized score where known.
    if (rule.is<Mpr>() || rule.is<MaeBinary>()) {
        Score zo = score(ScoringRule::zero_one(), forecast, y);
        return zo;
    }
    if (rule.is<TrialScore>()) {
        return score(ScoringRule::spread_error(), forecast, y);
    }
    if (rule.is<Pmcc>()) {
        return score(ScoringRule::squared_error(), forecast, y);
    }
    BayesActResult result = bayes_act(rule, forecast, family);
    if (!result.exists()) {
        throw Error(ErrorCode::no_bayes_act,
                    "no Bayes act exists; properized score undefined (" +
                        result.no_act->direction + " descent certificate available)");
    }
    return score(rule, result.act->act, y);
}

BayesActResult finite_bayes_act(const ScoringRule& rule, const Distribution& belief,
                                const SimplexSearchConfig& cfg) {
    if (cfg.grid.size() < 2) {
        throw Error(ErrorCode::incompatible_rule, "finite search needs at least two outcome points");
    }
    if (!(cfg.resolution > 0.0 && cfg.resolution <= 1.0)) {
        throw Error(ErrorCode::incompatible_rule, "resolution must lie in (0, 1]");
    }
    std::uint64_t iters = 0;
    auto spend = [&](std::uint64_t n) {
        iters += n;
        if (iters > cfg.max_iters) {
            throw Error(ErrorCode::budget_exceeded, "simplex search exceeded its evaluation budget");
        }
    };

    const bool binary = cfg.grid.size() == 2 && cfg.grid[0] == 0.0 && cfg.grid[1] == 1.0;
    if (binary) {
        std::uint64_t n = static_cast<std::uint64_t>(std::llround(1.0 / cfg.resolution));
        n = std::max<std::uint64_t>(n, 1);
        double best = std::numeric_limits<double>::infinity();
        double best_q = 0.0;
        std::uint64_t ties = 0;
        for (std::uint64_t i = 0; i <= n; ++i) {
            spend(1);
            double q = static_cast<double>(i) / static_cast<double>(n);
            double v = expected_score_value(rule, Distribution::bernoulli(q), belief);
            if (v < best - cfg.tolerance) {
                best = v;
                best_q = q;
                ties = 1;
            } else if (v <= best + cfg.tolerance) {
                ties += 1;
                if (v < best) {
                    best = v;
                    best_q = q;
                }
            }
        }
        double step = 0.5 / static_cast<double>(n);
        while (step > cfg.tolerance) {
            spend(2);
            for (double q : {best_q - step, best_q + step}) {
                if (q < 0.0 || q > 1.0) continue;
                double v = expected_score_value(rule, Distribution::bernoulli(q), belief);
                if (v < best) {
                    best = v;
                    best_q = q;
                }
            }
            step *= 0.5;
        }
        return make_act(Distribution::bernoulli(best_q), ties <= 1);
    }

    // General simplex over m support points: exhaustive enumeration of
    // compositions at the requested resolution, then pairwise transfers.
    const std::size_t m = cfg.grid.size();
    const std::uint64_t n = std::max<std::uint64_t>(
        static_cast<std::uint64_t>(std::llround(1.0 / cfg.resolution)), 1);
    std::vector<double> probs(m, 0.0);
    std::vector<double> best_probs;
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t ties = 0;
    auto visit = [&]() {
        spend(1);
        double v = expected_score_value(rule, Distribution::categorical(cfg.grid, probs), belief);
        if (v < best - cfg.tolerance) {
            best = v;
            ties = 1;
            best_probs = probs;
        } else if (v <= best + cfg.tolerance) {
            ties += 1;
            if (v < best) {
                best = v;
                best_probs = probs;
            }
        }
    };
    std::function<void(std::size_t, std::uint64_t)> enumerate = [&](std::size_t idx,
                                                                    std::uint64_t remaining) {
        if (idx + 1 == m) {
            probs[idx] = static_cast<double>(remaining) / static_cast<double>(n);
            visit();
            return;
        }
        for (std::uint64_t c = 0; c <= remaining; ++c) {
            probs[idx] = static_cast<double>(c) / static_cast<double>(n);
            enumerate(idx + 1, remaining - c);
        }
    };
    enumerate(0, n);
    if (best_probs.empty()) {
        throw Error(ErrorCode::budget_exceeded, "simplex enumeration produced no candidate");
    }
    // Local refinement: move probability mass between pairs at shrinking steps.
    double step = cfg.resolution * 0.5;
    while (step > cfg.tolerance) {
        bool improved = false;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j || best_probs[i] < step) continue;
                spend(1);
                std::vector<double> probs = best_probs;
                probs[i] -= step;
                probs[j] += step;
                double v = expected_score_value(rule, Distribution::categorical(cfg.grid, probs), belief);
                if (v < best) {
                    best = v;
                    best_probs = std::move(probs);
                    improved = true;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
        }
    }
    return make_act(Distribution::categorical(cfg.grid, best_probs), ties <= 1);
}

BayesActResult parametric_bayes_act(const ScoringRule& rule, const Distribution& belief,
                                    const FamilyDescriptor& family, const SimplexSearchConfig& cfg) {
    const bool capped = family.tag == FamilyTag::variance_capped;
    const bool diracs_allowed = family.tag == FamilyTag::p1 || family.tag == FamilyTag::p2;
    if (!capped && family.tag != FamilyTag::p1 && family.tag != FamilyTag::p2 &&
        family.tag != FamilyTag::p4plus) {
        throw Error(ErrorCode::incompatible_rule,
                    "parametric search needs a mean/variance-parameterized family");
    }
    Moments mp = moments(belief);
    double mean_radius = 8.0 * (std::sqrt(mp.variance) + 1.0) + std::abs(mp.third_central);
    double mean_lo = mp.mean - mean_radius;
    double mean_hi = mp.mean + mean_radius;
    double var_lo = 1e-9;
    double var_hi = capped ? family.param : 4.0 * (mp.variance + 1.0);

    std::uint64_t iters = 0;
    auto objective = [&](double mean, double var) {
        ++iters;
        if (iters > cfg.max_iters) {
            throw Error(ErrorCode::budget_exceeded, "parametric search exceeded its budget");
        }
        return expected_score_value(rule, Distribution::gaussian(mean, var), belief);
    };

    const int grid_n = 17;
    double best_mean = mp.mean;
    double best_var = std::max(var_lo, std::min(var_hi, std::max(mp.variance, var_lo * 2)));
    double best = std::numeric_limits<double>::infinity();

    for (int expansion = 0; expansion < 14; ++expansion) {
        double mlo = mean_lo;
        double mhi = mean_hi;
        double vlo = var_lo;
        double vhi = var_hi;
        best = std::numeric_limits<double>::infinity();
        for (int round = 0; round < 80; ++round) {
            double mstep = (mhi - mlo) / (grid_n - 1);
            double vstep = (vhi - vlo) / (grid_n - 1);
            for (int i = 0; i < grid_n; ++i) {
                for (int j = 0; j < grid_n; ++j) {
                    double mean = mlo + mstep * i;
                    double var = vlo + vstep * j;
                    double v = objective(mean, var);
                    if (v < best) {
                        best = v;
                        best_mean = mean;
                        best_var = var;
                    }
                }
            }
            if (mstep < cfg.tolerance / 4.0 && vstep < cfg.tolerance / 4.0) {
                break;
            }
            mlo = std::max(mean_lo, best_mean - 2.0 * mstep);
            mhi = std::min(mean_hi, best_mean + 2.0 * mstep);
            vlo = std::max(var_lo, best_var - 2.0 * vstep);
            vhi = std::min(var_hi, best_var + 2.0 * vstep);
        }
        bool at_top = !capped && best_var > var_hi - 4.0 * cfg.tolerance;
        if (!at_top) {
            break;
        }
        // Coercivity probe: the optimum keeps escaping through the open
        // upper variance boundary; double the box and eventually certify.
        if (expansion == 13) {
            break;
        }
        var_hi *= 4.0;
    }

    if (!capped && best_var > var_hi - 4.0 * cfg.tolerance) {
        DescentCertificate cert;
        cert.direction = "variance doubling";
        double v = std::max(mp.variance, 1.0);
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        for (int k = 0; k < kCertificateLength; ++k) {
            Distribution q = Distribution::gaussian(best_mean, v);
            double s = expected_score_value(rule, q, belief);
            monotone = monotone && s < prev;
            prev = s;
            cert.sequence.emplace_back(q, s);
            v *= 2.0;
        }
        if (monotone) {
            return make_no_act(std::move(cert));
        }
    }

    if (best_var <= var_lo * 4.0) {
        // The optimum sits against the lower (open) variance edge.
        if (diracs_allowed) {
            try {
                Distribution d = Distribution::dirac(best_mean);
                double v = expected_score_value(rule, d, belief);
                if (v <= best + cfg.tolerance) {
                    return make_act(std::move(d), false);
                }
            } catch (const Error&) {
                // rule cannot evaluate point forecasts; fall through
            }
        } else {
            DescentCertificate cert;
            cert.direction = "variance halving";
            double v = std::max(mp.variance, 1.0);
            double prev = std::numeric_limits<double>::infinity();
            bool monotone = true;
            for (int k = 0; k < kCertificateLength; ++k) {
                Distribution q = Distribution::gaussian(best_mean, v);
                double s = expected_score_value(rule, q, belief);
                monotone = monotone && s < prev;
                prev = s;
                cert.sequence.emplace_back(q, s);
                v *= 0.5;
            }
            if (monotone) {
                return make_no_act(std::move(cert));
            }
        }
    }
    return make_act(Distribution::gaussian(best_mean, best_var), false);
}

} // namespace properize
