#pragma once

#include <span>
#include <vector>

namespace gradeprop {

// Scalar Gaussian N(mean, variance).
struct GaussianMoment {
    double mean = 0.0;
    double variance = 0.0;

    [[nodiscard]] double std_dev() const;
    // Throws ArgumentError unless finite with variance >= 0.
    void validate() const;

    friend bool operator==(const GaussianMoment&, const GaussianMoment&) = default;
};

struct MixtureComponent {
    double weight = 0.0;
    GaussianMoment moment;
};

/// Weighted list of scalar Gaussians. Weights are checked once, here:
/// non-negative and summing to 1 within 1e-12.
class GaussianMixture {
public:
    static constexpr double kWeightTolerance = 1e-12;

    explicit GaussianMixture(std::vector<MixtureComponent> components);

    // Every component gets weight 1/N.
    static GaussianMixture equal_weights(std::span<const GaussianMoment> moments);
    // Weights are divided by their sum first.
    static GaussianMixture normalized(std::span<const double> weights, std::span<const GaussianMoment> moments);

    [[nodiscard]] std::span<const MixtureComponent> components() const noexcept { return components_; }
    [[nodiscard]] std::size_t size() const noexcept { return components_.size(); }

private:
    std::vector<MixtureComponent> components_;
};

/// Single Gaussian with the mixture's first two moments:
///   mean = sum_j w_j mu_j
///   var  = sum_j w_j (sigma_j^2 + (mu_j - mean)^2)
[[nodiscard]] GaussianMoment moment_match(const GaussianMixture& mix);

[[nodiscard]] double normal_pdf(double x, const GaussianMoment& g);
[[nodiscard]] double normal_cdf(double x, const GaussianMoment& g);

// Mixture density. Throws ArgumentError if any component has zero variance.
[[nodiscard]] double pdf(const GaussianMixture& mix, double x);
// Mixture CDF; a zero-variance component contributes a unit step at its mean.
[[nodiscard]] double cdf(const GaussianMixture& mix, double x);

}  // namespace gradeprop
