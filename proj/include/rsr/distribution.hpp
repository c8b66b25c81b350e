#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rsr/common.hpp"

namespace rsr {

inline constexpr double kProbSumTol = 1e-12;
inline constexpr double kDensityTol = 1e-10;

/** Risk level alpha in (0,1]. alpha = 1 recovers the expectation. */
class RiskLevel {
  public:
    explicit RiskLevel(double a) : a_(a) {
        if (!(a > 0.0 && a <= 1.0) || !std::isfinite(a))
            throw ValidationError("RiskLevel: alpha must lie in (0,1], got " + std::to_string(a));
    }
    double value() const { return a_; }

  private:
    double a_;
};

/** Finitely supported distribution: atoms `support[i]` with weights `probs[i]`.
 *  Weights are nonnegative and sum to one within 1e-12. Zero-weight atoms are
 *  permitted; quantile logic ignores them. */
struct DiscreteDistribution {
    std::vector<double> support;
    std::vector<double> probs;

    void validate() const {
        if (support.empty() || support.size() != probs.size())
            throw ValidationError("DiscreteDistribution: support and probs must be nonempty and equal length");
        StableSum s;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (!std::isfinite(support[i]) || !std::isfinite(probs[i]))
                throw ValidationError("DiscreteDistribution: non-finite entry at atom " + std::to_string(i));
            if (probs[i] < 0.0)
                throw ValidationError("DiscreteDistribution: negative probability at atom " + std::to_string(i));
            s.add(probs[i]);
        }
        if (std::abs(s.value() - 1.0) > kProbSumTol)
            throw ValidationError("DiscreteDistribution: probabilities sum to " + std::to_string(s.value()) +
                                  ", expected 1 within 1e-12");
    }

    std::size_t size() const { return support.size(); }

    double mean() const {
        StableSum s;
        for (std::size_t i = 0; i < support.size(); ++i) s.add(support[i] * probs[i]);
        return s.value();
    }

    double min_support() const { return *std::min_element(support.begin(), support.end()); }
    double max_support() const { return *std::max_element(support.begin(), support.end()); }
};

inline DiscreteDistribution make_distribution(std::vector<double> support, std::vector<double> probs) {
    DiscreteDistribution d{std::move(support), std::move(probs)};
    d.validate();
    return d;
}

inline DiscreteDistribution uniform_distribution(std::vector<double> support) {
    if (support.empty()) throw ValidationError("uniform_distribution: empty support");
    std::vector<double> p(support.size(), 1.0 / static_cast<double>(support.size()));
    return DiscreteDistribution{std::move(support), std::move(p)};
}

/** Feasible point of the bounded-density dual set: values[i] is the density
 *  against the base distribution, 0 <= values[i] <= cap and
 *  sum_i values[i] * probs[i] = 1 within 1e-10. */
struct DensityVector {
    std::vector<double> values;
    double cap = 1.0;

    void validate_against(const DiscreteDistribution& base) const {
        if (values.size() != base.size())
            throw ValidationError("DensityVector: length mismatch with base distribution");
        StableSum s;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < -kDensityTol || values[i] > cap + kDensityTol)
                throw ValidationError("DensityVector: entry " + std::to_string(i) + " outside [0, cap]");
            s.add(values[i] * base.probs[i]);
        }
        if (std::abs(s.value() - 1.0) > kDensityTol)
            throw ValidationError("DensityVector: integral against base is " + std::to_string(s.value()) +
                                  ", expected 1 within 1e-10");
    }
};

}  // namespace rsr
