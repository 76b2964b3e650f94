#include "properize/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace properize {

namespace {

// splitmix64: deterministic across platforms, unlike std::uniform_real_distribution.
std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double expected_under(const RuleUnderTest& rut, const Distribution& forecast,
                      const Distribution& truth) {
    if (!rut.properized_mode()) {
        return expected_score(rut.rule, forecast, truth).value;
    }
    BayesActResult res = bayes_act(rut.rule, forecast, *rut.properized_family);
    if (!res.exists()) {
        throw Error(ErrorCode::no_bayes_act, "properized rule is undefined: no Bayes act");
    }
    return expected_score(rut.rule, res.act->act, truth).value;
}

} // namespace

FamilySampler::FamilySampler(FamilyDescriptor family, std::uint64_t seed)
    : family_(std::move(family)), state_(seed ^ 0xD1B54A32D192ED03ULL) {}

double FamilySampler::uniform() {
    return static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53;
}

Distribution FamilySampler::sample() {
    switch (family_.tag) {
        case FamilyTag::bernoulli_family:
            return Distribution::bernoulli(uniform());
        case FamilyTag::variance_capped: {
            double cap = family_.param;
            double lo = std::min(0.1, cap / 10.0);
            double mu = -5.0 + 10.0 * uniform();
            double s2 = lo + (cap - lo) * uniform();
            return Distribution::gaussian(mu, s2);
        }
        case FamilyTag::compact_support: {
            double r = family_.param;
            std::size_t k = 1 + static_cast<std::size_t>(uniform() * 3.0);
            k = std::min<std::size_t>(k, 3);
            std::vector<Distribution> comps;
            std::vector<double> weights;
            double wsum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                double a = -r + 1.8 * r * uniform();
                double width = 0.05 * r + 0.9 * (r - a) * uniform();
                double b = std::min(r, a + std::max(width, 0.01 * r));
                comps.push_back(Distribution::uniform(a, b));
                double w = 0.05 + 0.95 * uniform();
                weights.push_back(w);
                wsum += w;
            }
            for (double& w : weights) {
                w /= wsum;
            }
            double correction = 1.0 - std::accumulate(weights.begin(), weights.end(), 0.0);
            weights.back() += correction;
            return Distribution::mixture(std::move(comps), std::move(weights));
        }
        case FamilyTag::lebesgue_grid: {
            const auto& grid = family_.grid;
            std::vector<double> values(grid.size(), 0.0);
            double total = 0.0;
            std::vector<double> incr(grid.size() - 1);
            for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
                double u = uniform();
                incr[i] = u * u + 1e-4;
                total += incr[i];
            }
            for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
                values[i + 1] = values[i] + incr[i] / total;
            }
            values.back() = 1.0;
            return Distribution::grid_cdf(grid, std::move(values));
        }
        default: {
            // p1 / p2 / p4plus: Gaussians and small Gaussian mixtures.
            auto gaussian = [&]() {
                double mu = -5.0 + 10.0 * uniform();
                double s2 = 0.1 + 9.9 * uniform();
                return Distribution::gaussian(mu, s2);
            };
            if (uniform() < 0.5) {
                return gaussian();
            }
            std::size_t k = 2 + (uniform() < 0.5 ? 0 : 1);
            std::vector<Distribution> comps;
            std::vector<double> weights;
            double wsum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                comps.push_back(gaussian());
                double w = 0.05 + 0.95 * uniform();
                weights.push_back(w);
                wsum += w;
            }
            for (double& w : weights) {
                w /= wsum;
            }
            double correction = 1.0 - std::accumulate(weights.begin(), weights.end(), 0.0);
            weights.back() += correction;
            return Distribution::mixture(std::move(comps), std::move(weights));
        }
    }
}

ProprietyVerdict propriety_test(const RuleUnderTest& rule, const FamilyDescriptor& family,
                                std::uint64_t n_pairs, double tol, std::uint64_t seed) {
    if (n_pairs < 1) {
        throw Error(ErrorCode::invalid_rule, "propriety test needs at least one pair");
    }
    ProprietyVerdict verdict;
    verdict.tolerance = tol;
    verdict.seed = seed;
    FamilySampler sampler(family, seed);
    std::uint64_t failures = 0;
    for (std::uint64_t i = 0; i < n_pairs; ++i) {
        Distribution p = sampler.sample();
        Distribution q = sampler.sample();
        verdict.pairs_tested = i + 1;
        double truth_score;
        double forecast_score;
        try {
            truth_score = expected_under(rule, q, q);
            forecast_score = expected_under(rule, p, q);
        } catch (const Error&) {
            ++failures;
            continue;
        }
        double gap = truth_score - forecast_score;
        if (std::isnan(gap)) {
            ++failures;
            continue;
        }
        if (gap > tol) {
            verdict.status = VerdictStatus::violated;
            verdict.violating_forecast = p;
            verdict.truth = q;
            verdict.gap = gap;
            return verdict;
        }
    }
    if (failures * 10 > n_pairs) {
        verdict.status = VerdictStatus::inconclusive;
        verdict.reason = "more than 10% of pairs failed to evaluate";
        return verdict;
    }
    verdict.status = VerdictStatus::pass;
    verdict.reason = "no counterexample found";
    return verdict;
}

ProprietyVerdict fixed_point_test(const ScoringRule& rule, const FamilyDescriptor& family,
                                  std::uint64_t n, double tol, std::uint64_t seed) {
    ProprietyVerdict verdict;
    verdict.tolerance = tol;
    verdict.seed = seed;
    FamilySampler sampler(family, seed);
    for (std::uint64_t i = 0; i < n; ++i) {
        Distribution p = sampler.sample();
        verdict.pairs_tested = i + 1;
        BayesActResult res = bayes_act(rule, p, family);
        if (!res.exists()) {
            verdict.status = VerdictStatus::violated;
            verdict.violating_forecast = p;
            verdict.reason = "no Bayes act";
            verdict.gap = std::numeric_limits<double>::infinity();
            return verdict;
        }
        double dist = sup_cdf_distance(p, res.act->act);
        if (dist > tol) {
            verdict.status = VerdictStatus::violated;
            verdict.violating_forecast = p;
            verdict.truth = res.act->act;
            verdict.gap = dist;
            verdict.reason = "Bayes act differs from the belief";
            return verdict;
        }
    }
    verdict.status = VerdictStatus::pass;
    verdict.reason = "no counterexample found";
    return verdict;
}

IdentityCheck noisy_crps_identity(const Distribution& forecast, const Distribution& truth,
                                  const Distribution& noise, double tol) {
    IdentityCheck check;
    check.lhs = expected_score(ScoringRule::noisy_crps(noise), forecast, truth).value;
    Distribution smeared = convolve(truth, noise);
    double crps = expected_score(ScoringRule::crps_alpha(2.0), forecast, smeared).value;
    check.rhs = crps - crps_self(noise);
    check.residual = std::abs(check.lhs - check.rhs);
    check.pass = check.residual <= tol;
    return check;
}

IdentityCheck smoothed_crps_identity(const Distribution& forecast, const Distribution& truth,
                                     const Distribution& noise, double y, double tol) {
    ScoringRule smoothed = ScoringRule::convolution_score(ScoringRule::crps_alpha(2.0), noise);
    ScoringRule observation_error = ScoringRule::noisy_crps(noise);
    double constant = crps_self(noise);

    IdentityCheck check;
    check.lhs = score(smoothed, forecast, y).value;
    check.rhs = score(observation_error, forecast, y).value + constant;
    double pointwise_residual = std::abs(check.lhs - check.rhs);

    double lhs_exp = expected_score(smoothed, forecast, truth).value;
    double rhs_exp = expected_score(observation_error, forecast, truth).value + constant;
    double expectation_residual = std::abs(lhs_exp - rhs_exp);

    check.residual = std::max(pointwise_residual, expectation_residual);
    check.pass = check.residual <= tol;
    return check;
}

DescentDemo linear_score_descent(const Distribution& belief, double epsilon, int steps) {
    if (!belief.is<Gaussian>()) {
        throw Error(ErrorCode::invalid_shape,
                    "descent demo needs a symmetric belief density, strictly increasing below its center");
    }
    if (!(epsilon > 0.0) || steps < 1) {
        throw Error(ErrorCode::invalid_shape, "descent demo needs epsilon > 0 and steps >= 1");
    }
    double center = belief.as<Gaussian>().mu;
    auto forecasts = linear_descent_forecasts(belief, center, epsilon, steps);
    DescentDemo demo;
    demo.epsilon = epsilon;
    for (const auto& f : forecasts) {
        demo.sequence.emplace_back(f, expected_score_value(ScoringRule::linear_score(), f, belief));
    }
    return demo;
}

} // namespace properize
