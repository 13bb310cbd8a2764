#include "gradeprop/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gradeprop/errors.hpp"

namespace gradeprop {

double GaussianMoment::std_dev() const { return std::sqrt(variance); }

void GaussianMoment::validate() const {
    if (!std::isfinite(mean) || !std::isfinite(variance)) throw ArgumentError("non-finite Gaussian moment");
    if (variance < 0.0) throw ArgumentError("negative variance");
}

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw ArgumentError("mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw ArgumentError("mixture weights must be >= 0");
        c.moment.validate();
        total += c.weight;
    }
    if (std::abs(total - 1.0) > kWeightTolerance) throw ArgumentError("mixture weights must sum to 1");
}

GaussianMixture GaussianMixture::equal_weights(std::span<const GaussianMoment> moments) {
    if (moments.empty()) throw ArgumentError("mixture needs at least one component");
    const double w = 1.0 / static_cast<double>(moments.size());
    std::vector<MixtureComponent> comps;
    comps.reserve(moments.size());
    for (const auto& m : moments) comps.push_back({w, m});
    return GaussianMixture(std::move(comps));
}

GaussianMixture GaussianMixture::normalized(std::span<const double> weights, std::span<const GaussianMoment> moments) {
    if (weights.size() != moments.size()) throw ArgumentError("weights/moments size mismatch");
    if (moments.empty()) throw ArgumentError("mixture needs at least one component");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("mixture weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ArgumentError("mixture weights sum to zero");
    std::vector<MixtureComponent> comps;
    comps.reserve(moments.size());
    for (std::size_t j = 0; j < moments.size(); ++j) comps.push_back({weights[j] / total, moments[j]});
    return GaussianMixture(std::move(comps));
}

GaussianMoment moment_match(const GaussianMixture& mix) {
    const auto comps = mix.components();
    if (comps.empty()) throw ArgumentError("moment_match on an empty mixture");
    // Offsets from the first component.
    const GaussianMoment ref = comps.front().moment;
    double shift = 0.0;
    for (const auto& c : comps) shift += c.weight * (c.moment.mean - ref.mean);
    const double mean = ref.mean + shift;
    double spread = 0.0;
    for (const auto& c : comps) {
        const double d = c.moment.mean - mean;
        spread += c.weight * ((c.moment.variance - ref.variance) + d * d);
    }
    const double var = std::max(ref.variance + spread, 0.0);
    return {mean, var};
}

double normal_pdf(double x, const GaussianMoment& g) {
    if (!(g.variance > 0.0)) throw ArgumentError("pdf of a zero-variance Gaussian");
    const double z = (x - g.mean) / std::sqrt(g.variance);
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * g.variance);
}

double normal_cdf(double x, const GaussianMoment& g) {
    if (g.variance == 0.0) return x < g.mean ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - g.mean) / std::sqrt(2.0 * g.variance));
}

double pdf(const GaussianMixture& mix, double x) {
    double p = 0.0;
    for (const auto& c : mix.components()) p += c.weight * normal_pdf(x, c.moment);
    return p;
}

double cdf(const GaussianMixture& mix, double x) {
    double p = 0.0;
    for (const auto& c : mix.components()) p += c.weight * normal_cdf(x, c.moment);
    return p;
}

}  // namespace gradeprop
