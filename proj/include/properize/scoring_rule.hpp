#pragma once

#include <memory>
#include <string>
#include <variant>

#include "properize/distribution.hpp"

namespace properize {

class ScoringRule;

struct IndicatorAbove {
    double r;
};

struct IndicatorInterval {
    double a;
    double b;
};

struct WeightSpec {
    std::variant<IndicatorAbove, IndicatorInterval> spec;

    static WeightSpec above(double r) { return {IndicatorAbove{r}}; }
    static WeightSpec interval(double a, double b);

    double operator()(double y) const;
};

// Binary rules (Bernoulli forecasts, outcomes in {0, 1}).
struct Mpr {};        // 1 - p*w - (1-p)*(1-w), the mean probability rate
struct MaeBinary {};  // |p - w|
struct ZeroOne {};    // 0 if 1{p >= 1/2} == w else 1
struct Brier {};      // (p - w)^2

// Rules on the real line.
struct LogScore {};                 // -log density (or -log pmf for Bernoulli)
struct CrpsAlpha { double alpha; }; // integral |P(x) - 1{y <= x}|^alpha dx; alpha = 2 is the CRPS
struct Weighted {
    std::shared_ptr<const ScoringRule> base; // LogScore or CrpsAlpha
    WeightSpec weight;
};
struct TrialScore {};              // (var - (y - mean)^2)^2
struct SpreadError {};             // (var - (y - mean)^2 + (y - mean)*skew/var)^2
struct Pmcc {};                    // (y - mean)^2 + var
struct SquaredError {};            // (y - mean)^2
struct NormalizedSquaredError {};  // (y - mean)^2 / var
struct LinearScore {};             // -p(y)
struct ProbabilityScore { double c; }; // -integral of p over [y - c, y + c]
struct NoisyCrps { Distribution noise; }; // integral (P(x) - Noise(x - y))^2 dx
struct ConvolutionScore {
    std::shared_ptr<const ScoringRule> base;
    Distribution noise; // must have a density
};

class ScoringRule {
public:
    using Node = std::variant<Mpr, MaeBinary, ZeroOne, Brier, LogScore, CrpsAlpha, Weighted,
                              TrialScore, SpreadError, Pmcc, SquaredError, NormalizedSquaredError,
                              LinearScore, ProbabilityScore, NoisyCrps, ConvolutionScore>;

    static ScoringRule mpr() { return ScoringRule(Mpr{}); }
    static ScoringRule mae_binary() { return ScoringRule(MaeBinary{}); }
    static ScoringRule zero_one() { return ScoringRule(ZeroOne{}); }
    static ScoringRule brier() { return ScoringRule(Brier{}); }
    static ScoringRule log_score() { return ScoringRule(LogScore{}); }
    static ScoringRule crps_alpha(double alpha);
    static ScoringRule weighted(ScoringRule base, WeightSpec weight);
    static ScoringRule trial_score() { return ScoringRule(TrialScore{}); }
    static ScoringRule spread_error() { return ScoringRule(SpreadError{}); }
    static ScoringRule pmcc() { return ScoringRule(Pmcc{}); }
    static ScoringRule squared_error() { return ScoringRule(SquaredError{}); }
    static ScoringRule normalized_squared_error() { return ScoringRule(NormalizedSquaredError{}); }
    static ScoringRule linear_score() { return ScoringRule(LinearScore{}); }
    static ScoringRule probability_score(double c);
    static ScoringRule noisy_crps(Distribution noise);
    static ScoringRule convolution_score(ScoringRule base, Distribution noise);

    const Node& node() const { return node_; }

    template <typename T>
    bool is() const { return std::holds_alternative<T>(node_); }

    template <typename T>
    const T& as() const { return std::get<T>(node_); }

    // Short tag such as "crps_alpha", matching the JSON literal names.
    std::string tag() const;

private:
    explicit ScoringRule(Node node) : node_(std::move(node)) {}
    Node node_;
};

// Proper rules are fixed points of properization; strictly proper ones have
// unique Bayes acts.
bool is_proper(const ScoringRule& rule);
bool is_strictly_proper(const ScoringRule& rule);

enum class InfinityReason {
    none,
    zero_density,     // log score on a zero-density point of positive mass
    divergent_integral,
};

// Extended-real score value. NaN is never stored; infinite values carry the
// reason they arose.
struct Score {
    double value = 0.0;
    InfinityReason reason = InfinityReason::none;

    static Score finite(double v);
    static Score infinite(double signed_inf, InfinityReason why);
};

} // namespace properize
