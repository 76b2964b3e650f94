#include "properize/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace properize {

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object()) {
        throw Error(ErrorCode::parse_error, std::string(what) + " must be a JSON object");
    }
    for (const char* k : keys) {
        if (!j.contains(k)) {
            throw Error(ErrorCode::parse_error,
                        std::string(what) + " is missing the field \"" + k + "\"");
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = std::any_of(keys.begin(), keys.end(),
                                 [&](const char* k) { return it.key() == k; });
        if (!known) {
            throw Error(ErrorCode::parse_error,
                        std::string(what) + " has an unknown field \"" + it.key() + "\"");
        }
    }
}

double get_number(const json& j, const char* key, const char* what) {
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw Error(ErrorCode::parse_error,
                    std::string(what) + " field \"" + key + "\" must be a number");
    }
    return v.get<double>();
}

std::vector<double> get_array(const json& j, const char* key, const char* what) {
    const auto& v = j.at(key);
    if (!v.is_array()) {
        throw Error(ErrorCode::parse_error,
                    std::string(what) + " field \"" + key + "\" must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw Error(ErrorCode::parse_error,
                        std::string(what) + " field \"" + key + "\" must contain only numbers");
        }
        out.push_back(e.get<double>());
    }
    return out;
}

WeightSpec weight_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        throw Error(ErrorCode::parse_error, "weight spec needs a \"type\" string");
    }
    std::string type = j.at("type").get<std::string>();
    if (type == "indicator_above") {
        expect_keys(j, {"type", "r"}, "indicator_above weight");
        return WeightSpec::above(get_number(j, "r", "weight"));
    }
    if (type == "indicator_interval") {
        expect_keys(j, {"type", "a", "b"}, "indicator_interval weight");
        return WeightSpec::interval(get_number(j, "a", "weight"), get_number(j, "b", "weight"));
    }
    throw Error(ErrorCode::parse_error, "unknown weight type \"" + type + "\"");
}

json weight_to_json(const WeightSpec& w) {
    return std::visit(
        [](const auto& spec) -> json {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, IndicatorAbove>) {
                return json{{"type", "indicator_above"}, {"r", spec.r}};
            } else {
                return json{{"type", "indicator_interval"}, {"a", spec.a}, {"b", spec.b}};
            }
        },
        w.spec);
}

} // namespace

Distribution distribution_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        throw Error(ErrorCode::parse_error, "distribution literal needs a \"type\" string");
    }
    std::string type = j.at("type").get<std::string>();
    if (type == "bernoulli") {
        expect_keys(j, {"type", "p"}, "bernoulli literal");
        return Distribution::bernoulli(get_number(j, "p", "bernoulli"));
    }
    if (type == "dirac") {
        expect_keys(j, {"type", "x"}, "dirac literal");
        return Distribution::dirac(get_number(j, "x", "dirac"));
    }
    if (type == "categorical") {
        expect_keys(j, {"type", "points", "probs"}, "categorical literal");
        return Distribution::categorical(get_array(j, "points", "categorical"),
                                         get_array(j, "probs", "categorical"));
    }
    if (type == "gaussian") {
        expect_keys(j, {"type", "mu", "sigma2"}, "gaussian literal");
        return Distribution::gaussian(get_number(j, "mu", "gaussian"),
                                      get_number(j, "sigma2", "gaussian"));
    }
    if (type == "uniform") {
        expect_keys(j, {"type", "a", "b"}, "uniform literal");
        return Distribution::uniform(get_number(j, "a", "uniform"), get_number(j, "b", "uniform"));
    }
    if (type == "mixture") {
        expect_keys(j, {"type", "weights", "components"}, "mixture literal");
        const auto& comps = j.at("components");
        if (!comps.is_array()) {
            throw Error(ErrorCode::parse_error, "mixture \"components\" must be an array");
        }
        std::vector<Distribution> components;
        components.reserve(comps.size());
        for (const auto& c : comps) {
            components.push_back(distribution_from_json(c));
        }
        return Distribution::mixture(std::move(components), get_array(j, "weights", "mixture"));
    }
    if (type == "grid_cdf") {
        expect_keys(j, {"type", "grid", "cdf"}, "grid_cdf literal");
        return Distribution::grid_cdf(get_array(j, "grid", "grid_cdf"),
                                      get_array(j, "cdf", "grid_cdf"));
    }
    throw Error(ErrorCode::parse_error, "unknown distribution type \"" + type + "\"");
}

json distribution_to_json(const Distribution& d) {
    return std::visit(
        [](const auto& node) -> json {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Bernoulli>) {
                return json{{"type", "bernoulli"}, {"p", node.p}};
            } else if constexpr (std::is_same_v<T, Dirac>) {
                return json{{"type", "dirac"}, {"x", node.x}};
            } else if constexpr (std::is_same_v<T, Categorical>) {
                return json{{"type", "categorical"}, {"points", node.points}, {"probs", node.probs}};
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return json{{"type", "gaussian"}, {"mu", node.mu}, {"sigma2", node.sigma2}};
            } else if constexpr (std::is_same_v<T, UniformInterval>) {
                return json{{"type", "uniform"}, {"a", node.a}, {"b", node.b}};
            } else if constexpr (std::is_same_v<T, Mixture>) {
                json comps = json::array();
                for (const auto& c : node.components) {
                    comps.push_back(distribution_to_json(c));
                }
                return json{{"type", "mixture"}, {"weights", node.weights}, {"components", comps}};
            } else {
                return json{{"type", "grid_cdf"}, {"grid", node.grid}, {"cdf", node.values}};
            }
        },
        d.node());
}

ScoringRule rule_from_json(const json& j) {
    if (!j.is_object() || !j.contains("rule") || !j.at("rule").is_string()) {
        throw Error(ErrorCode::parse_error, "rule literal needs a \"rule\" string");
    }
    std::string name = j.at("rule").get<std::string>();
    if (name == "mpr") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::mpr(); }
    if (name == "mae_binary") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::mae_binary(); }
    if (name == "zero_one") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::zero_one(); }
    if (name == "brier") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::brier(); }
    if (name == "log") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::log_score(); }
    if (name == "trial_score") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::trial_score(); }
    if (name == "spread_error") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::spread_error(); }
    if (name == "pmcc") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::pmcc(); }
    if (name == "squared_error") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::squared_error(); }
    if (name == "normalized_squared_error") {
        expect_keys(j, {"rule"}, "rule");
        return ScoringRule::normalized_squared_error();
    }
    if (name == "linear_score") { expect_keys(j, {"rule"}, "rule"); return ScoringRule::linear_score(); }
    if (name == "crps_alpha") {
        expect_keys(j, {"rule", "alpha"}, "crps_alpha rule");
        return ScoringRule::crps_alpha(get_number(j, "alpha", "crps_alpha"));
    }
    if (name == "probability_score") {
        expect_keys(j, {"rule", "c"}, "probability_score rule");
        return ScoringRule::probability_score(get_number(j, "c", "probability_score"));
    }
    if (name == "weighted") {
        expect_keys(j, {"rule", "base", "weight"}, "weighted rule");
        return ScoringRule::weighted(rule_from_json(j.at("base")), weight_from_json(j.at("weight")));
    }
    if (name == "noisy_crps") {
        expect_keys(j, {"rule", "noise"}, "noisy_crps rule");
        return ScoringRule::noisy_crps(distribution_from_json(j.at("noise")));
    }
    if (name == "convolution_score") {
        expect_keys(j, {"rule", "base", "noise"}, "convolution_score rule");
        return ScoringRule::convolution_score(rule_from_json(j.at("base")),
                                              distribution_from_json(j.at("noise")));
    }
    throw Error(ErrorCode::parse_error, "unknown rule \"" + name + "\"");
}

json rule_to_json(const ScoringRule& rule) {
    return std::visit(
        [&rule](const auto& node) -> json {
            using T = std::decay_t<decltype(node)>;
            json j{{"rule", rule.tag()}};
            if constexpr (std::is_same_v<T, CrpsAlpha>) {
                j["alpha"] = node.alpha;
            } else if constexpr (std::is_same_v<T, ProbabilityScore>) {
                j["c"] = node.c;
            } else if constexpr (std::is_same_v<T, Weighted>) {
                j["base"] = rule_to_json(*node.base);
                j["weight"] = weight_to_json(node.weight);
            } else if constexpr (std::is_same_v<T, NoisyCrps>) {
                j["noise"] = distribution_to_json(node.noise);
            } else if constexpr (std::is_same_v<T, ConvolutionScore>) {
                j["base"] = rule_to_json(*node.base);
                j["noise"] = distribution_to_json(node.noise);
            }
            return j;
        },
        rule.node());
}

ScoringRule rule_from_spec(const std::string& spec) {
    std::string s = spec;
    auto first = s.find_first_not_of(" \t");
    auto last = s.find_last_not_of(" \t");
    if (first == std::string::npos) {
        throw Error(ErrorCode::parse_error, "empty rule spec");
    }
    s = s.substr(first, last - first + 1);
    if (s.front() == '{') {
        json j = json::parse(s, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::parse_error, "rule spec is not valid JSON");
        }
        return rule_from_json(j);
    }
    auto colon = s.find(':');
    if (colon != std::string::npos) {
        std::string name = s.substr(0, colon);
        double param = 0.0;
        try {
            param = std::stod(s.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::parse_error, "rule parameter is not a number: " + s);
        }
        if (name == "crps_alpha") return ScoringRule::crps_alpha(param);
        if (name == "probability_score") return ScoringRule::probability_score(param);
        throw Error(ErrorCode::parse_error, "rule \"" + name + "\" does not take a parameter");
    }
    if (s == "crps") {
        return ScoringRule::crps_alpha(2.0);
    }
    return rule_from_json(json{{"rule", s}});
}

FamilyDescriptor family_from_spec(const std::string& spec) {
    if (spec == "bernoulli") return FamilyDescriptor::bernoulli_family();
    if (spec == "p1") return FamilyDescriptor::p1();
    if (spec == "p2") return FamilyDescriptor::p2();
    if (spec == "p4plus") return FamilyDescriptor::p4plus();
    auto colon = spec.find(':');
    if (colon != std::string::npos) {
        std::string name = spec.substr(0, colon);
        std::string rest = spec.substr(colon + 1);
        try {
            if (name == "pc") return FamilyDescriptor::compact_support(std::stod(rest));
            if (name == "p2m") return FamilyDescriptor::variance_capped(std::stod(rest));
            if (name == "lebesgue") {
                std::istringstream is(rest);
                std::string lo_s, hi_s, n_s;
                if (std::getline(is, lo_s, ':') && std::getline(is, hi_s, ':') &&
                    std::getline(is, n_s, ':')) {
                    double lo = std::stod(lo_s);
                    double hi = std::stod(hi_s);
                    std::size_t n = static_cast<std::size_t>(std::stoul(n_s));
                    if (n < 2 || !(hi > lo)) {
                        throw Error(ErrorCode::parse_error, "lebesgue grid needs lo < hi and n >= 2");
                    }
                    std::vector<double> grid(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
                    }
                    return FamilyDescriptor::lebesgue_grid(std::move(grid));
                }
                throw Error(ErrorCode::parse_error, "lebesgue family spec is lebesgue:<lo>:<hi>:<n>");
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error(ErrorCode::parse_error, "family parameter is not a number: " + spec);
        }
    }
    throw Error(ErrorCode::parse_error, "unknown family \"" + spec + "\"");
}

std::string family_to_spec(const FamilyDescriptor& family) {
    if (family.tag == FamilyTag::lebesgue_grid) {
        std::ostringstream os;
        os << "lebesgue:" << family.grid.front() << ":" << family.grid.back() << ":"
           << family.grid.size();
        return os.str();
    }
    return family.name();
}

json verdict_to_json(const ProprietyVerdict& verdict) {
    json j;
    switch (verdict.status) {
        case VerdictStatus::pass: j["status"] = "pass"; break;
        case VerdictStatus::violated: j["status"] = "violated"; break;
        case VerdictStatus::inconclusive: j["status"] = "inconclusive"; break;
    }
    j["pairs_tested"] = verdict.pairs_tested;
    j["tolerance"] = verdict.tolerance;
    j["seed"] = verdict.seed;
    if (!verdict.reason.empty()) {
        j["note"] = verdict.reason;
    }
    if (verdict.status == VerdictStatus::violated) {
        if (verdict.violating_forecast) {
            j["P"] = distribution_to_json(*verdict.violating_forecast);
        }
        if (verdict.truth) {
            j["Q"] = distribution_to_json(*verdict.truth);
        }
        j["gap"] = verdict.gap;
    }
    return j;
}

json bayes_act_result_to_json(const BayesActResult& result) {
    json j;
    if (result.exists()) {
        j["act"] = distribution_to_json(result.act->act);
        j["unique"] = result.act->unique;
        if (!result.act->note.empty()) {
            j["note"] = result.act->note;
        }
        return j;
    }
    json seq = json::array();
    for (const auto& [dist, value] : result.no_act->sequence) {
        seq.push_back(json{{"forecast", distribution_to_json(dist)}, {"expected_score", value}});
    }
    j["no_bayes_act"] = json{{"direction", result.no_act->direction}, {"sequence", seq}};
    return j;
}

} // namespace properize
