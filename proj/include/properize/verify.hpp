#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "properize/bayes.hpp"

namespace properize {

// A rule under verification: either the raw rule, or its properized version
// S*(P, .) = S(P*, .) relative to the given family.
struct RuleUnderTest {
    ScoringRule rule;
    std::optional<FamilyDescriptor> properized_family;

    static RuleUnderTest raw(ScoringRule r) { return {std::move(r), std::nullopt}; }
    static RuleUnderTest properized(ScoringRule r, FamilyDescriptor fam) {
        return {std::move(r), std::move(fam)};
    }

    bool properized_mode() const { return properized_family.has_value(); }
};

enum class VerdictStatus { pass, violated, inconclusive };

struct ProprietyVerdict {
    VerdictStatus status = VerdictStatus::pass;
    std::optional<Distribution> violating_forecast; // P with S(Q,Q) > S(P,Q) + tol
    std::optional<Distribution> truth;              // the Q of the violating pair
    double gap = 0.0;                               // S(Q,Q) - S(P,Q), positive when violated
    std::string reason;                             // inconclusive explanation or pass label
    std::uint64_t pairs_tested = 0;
    double tolerance = 0.0;
    std::uint64_t seed = 0;
};

// Samples n_pairs (P, Q) from the family's documented parameter boxes and
// tests S(Q, Q) <= S(P, Q) + tol for each pair. Returns the first violation
// in pair order, Pass ("no counterexample found") otherwise, or Inconclusive
// if more than 10% of the pairs fail to evaluate.
ProprietyVerdict propriety_test(const RuleUnderTest& rule, const FamilyDescriptor& family,
                                std::uint64_t n_pairs, double tol, std::uint64_t seed);

// Checks that the Bayes act of each of n sampled beliefs is the belief itself,
// up to sup-CDF distance tol. Reports the worst offender as a violation.
ProprietyVerdict fixed_point_test(const ScoringRule& rule, const FamilyDescriptor& family,
                                  std::uint64_t n, double tol, std::uint64_t seed);

struct IdentityCheck {
    bool pass = false;
    double residual = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

// Observation-error score decomposition: S_noise(P, Q) equals
// CRPS(P, Q * noise) - CRPS(noise, noise). Both sides evaluated by
// independent quadrature routes.
IdentityCheck noisy_crps_identity(const Distribution& forecast, const Distribution& truth,
                                  const Distribution& noise, double tol);

// Smoothed-CRPS decomposition: the noise-convolved CRPS equals the
// observation-error score plus CRPS(noise, noise), pointwise at y and in
// expectation under `truth`.
IdentityCheck smoothed_crps_identity(const Distribution& forecast, const Distribution& truth,
                                     const Distribution& noise, double y, double tol);

struct DescentDemo {
    std::vector<std::pair<Distribution, double>> sequence; // (forecast, expected linear score)
    double epsilon = 0.0;
};

// Demonstrates that the linear score admits no Bayes act under a symmetric,
// strictly unimodal belief: shifting forecast mass into the modal interval
// strictly decreases the expected score at every step. Throws
// Error(invalid_shape) if the belief does not have the required density shape.
DescentDemo linear_score_descent(const Distribution& belief, double epsilon, int steps);

// Deterministic family sampler behind propriety_test; exposed for reuse by
// challenger-based minimality checks. Parameter boxes: Bernoulli p in [0,1];
// Gaussian mu in [-5,5], sigma2 in [0.1,10] (capped for the variance-capped
// family); mixtures of up to 3 Gaussians from the same boxes.
class FamilySampler {
public:
    FamilySampler(FamilyDescriptor family, std::uint64_t seed);
    Distribution sample();

private:
    FamilyDescriptor family_;
    std::uint64_t state_;
    double uniform();
};

} // namespace properize
