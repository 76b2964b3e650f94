#pragma once

#include <string>

#include <json.hpp>

#include "properize/verify.hpp"

namespace properize {

// Distribution literals: {"type":"gaussian","mu":0.0,"sigma2":1.0},
// {"type":"bernoulli","p":0.7}, {"type":"dirac","x":2.0},
// {"type":"categorical","points":[...],"probs":[...]},
// {"type":"uniform","a":0.0,"b":1.0},
// {"type":"mixture","weights":[...],"components":[...]},
// {"type":"grid_cdf","grid":[...],"cdf":[...]}.
// Keys are case-sensitive; unknown fields are rejected.
Distribution distribution_from_json(const nlohmann::json& j);
nlohmann::json distribution_to_json(const Distribution& d);

// Rule literals: {"rule":"crps_alpha","alpha":1.0},
// {"rule":"weighted","base":{"rule":"log"},"weight":{"type":"indicator_above","r":0.0}},
// {"rule":"noisy_crps","noise":{...}},
// {"rule":"convolution_score","base":{...},"noise":{...}}, and bare
// {"rule":"<name>"} for parameterless rules.
ScoringRule rule_from_json(const nlohmann::json& j);
nlohmann::json rule_to_json(const ScoringRule& rule);

// Accepts a JSON object, a bare rule name, or "name:param" shorthand for the
// single-parameter rules (crps_alpha, probability_score).
ScoringRule rule_from_spec(const std::string& spec);

// "bernoulli" | "p1" | "p2" | "p4plus" | "pc:<bound>" | "p2m:<cap>" |
// "lebesgue:<lo>:<hi>:<n>"
FamilyDescriptor family_from_spec(const std::string& spec);
std::string family_to_spec(const FamilyDescriptor& family);

nlohmann::json verdict_to_json(const ProprietyVerdict& verdict);

nlohmann::json bayes_act_result_to_json(const BayesActResult& result);

} // namespace properize
