#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "properize/scores.hpp"

namespace properize {

struct BayesAct {
    Distribution act;
    bool unique = false;
    std::string note; // non-fatal warnings, e.g. strict-propriety domain caveats
};

// Constructive evidence that no Bayes act exists within the searched family:
// forecasts whose expected scores strictly decrease along the sequence.
struct DescentCertificate {
    std::vector<std::pair<Distribution, double>> sequence;
    std::string direction; // e.g. "variance doubling", "mass shift into modal interval"
};

struct BayesActResult {
    std::optional<BayesAct> act;
    std::optional<DescentCertificate> no_act;

    bool exists() const { return act.has_value(); }
};

struct SimplexSearchConfig {
    std::vector<double> grid;   // outcome points for finite problems
    double resolution = 0.01;   // probability / parameter step
    std::uint64_t max_iters = 2'000'000;
    double tolerance = 1e-6;
};

// Bayes act under the rule for belief P, using the closed forms where known:
// binary rules map to the point mass at 1{p >= 1/2}; weighted proper scores
// reweight the density; moment-based rules pin the act's mean and variance;
// CRPS-family rules transform the CDF pointwise or convolve with the noise;
// proper rules return P itself. Rules without Bayes acts (linear score,
// probability score, normalized squared error on the uncapped family) yield a
// descent certificate instead.
BayesActResult bayes_act(const ScoringRule& rule, const Distribution& belief,
                         const FamilyDescriptor& family);

// S*(P, y) = S(P*, y). Uses the closed form of the properized score where one
// exists (zero-one, spread-error, squared error), the composition otherwise.
// Throws Error(no_bayes_act) if the act does not exist.
Score properized_score(const ScoringRule& rule, const Distribution& forecast, double y,
                       const FamilyDescriptor& family);

// Brute-force minimizer of Q -> S(Q, P) over distributions supported on
// cfg.grid: exhaustive sweep of the probability simplex at cfg.resolution
// followed by local refinement. Independent oracle for the closed-form acts
// on finite outcome spaces.
BayesActResult finite_bayes_act(const ScoringRule& rule, const Distribution& belief,
                                const SimplexSearchConfig& cfg);

// Derivative-free nested grid search over (mean, variance) for families with
// a finite parameter vector; the variance coordinate is confined to (0, cap]
// for the variance-capped family. Detects scores that improve monotonically
// toward an open boundary and reports a descent certificate (coercivity
// probe). Acts are reported as canonical Gaussians, or Dirac at zero variance.
BayesActResult parametric_bayes_act(const ScoringRule& rule, const Distribution& belief,
                                    const FamilyDescriptor& family, const SimplexSearchConfig& cfg);

// The expected score of `forecast` under belief P, E_P[S(forecast, .)], as a
// plain double (+inf allowed); the objective minimized by Bayes acts.
double expected_score_value(const ScoringRule& rule, const Distribution& forecast,
                            const Distribution& belief);

// Pointwise Bayes-act CDF transform for the CRPS family with exponent > 1:
// v -> (1 + ((1 - v)/v)^(1/(alpha - 1)))^(-1) for v > 0, 0 at v = 0.
double crps_alpha_act_cdf(double v, double alpha);

// Descent sequence for the linear score under a belief with symmetric,
// strictly unimodal density centered at `center`: mass is shifted interval by
// interval into the modal interval. Shared by bayes_act and the verification
// demo.
std::vector<Distribution> linear_descent_forecasts(const Distribution& belief, double center,
                                                   double epsilon, int steps);

} // namespace properize
