#pragma once

#include "properize/scoring_rule.hpp"

namespace properize {

// Pointwise score S(P, y). Throws Error with code incompatible_rule,
// degenerate_forecast, weight_mass_zero or no_density when (rule, P, y)
// violate the rule's preconditions.
Score score(const ScoringRule& rule, const Distribution& forecast, double y);

// Expected score S(P, Q) = integral of S(P, w) dQ(w). Closed forms for binary
// and moment-based rules, adaptive quadrature otherwise.
Score expected_score(const ScoringRule& rule, const Distribution& forecast, const Distribution& truth);

// CRPS(Phi, Phi) = integral of Phi(x)(1 - Phi(x)) dx; the additive constant in
// the noisy-CRPS and smoothed-CRPS identities.
double crps_self(const Distribution& noise);

} // namespace properize
