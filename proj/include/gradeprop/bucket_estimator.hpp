#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gradeprop/block_model.hpp"
#include "gradeprop/geometry.hpp"
#include "gradeprop/gmm.hpp"
#include "gradeprop/records.hpp"

namespace gradeprop {

enum class WeightMode { equal, idw2 };

struct EstimatorConfig {
    double r_xy_neighbor = 12.0;  // block candidates around the recorded dig
    double r_xy_sampling = 12.0;  // simulated dig locations around the recorded dig
    double grid_interval = 2.0;
    double bucket_volume = 30.0;
    WeightMode weight_mode = WeightMode::equal;
    bool retain_components = false;
    bool retain_support = false;

    // Throws ArgumentError on non-positive radii, interval or volume.
    void validate() const;
};

// Moments of the bucket content at one simulated location.
struct LocationEstimate {
    GaussianMoment moment;
    std::vector<BlockId> ids;
    std::vector<double> fractions;
};

struct BucketEstimate {
    DigEventId dig_event_id = 0;
    GaussianMoment matched;
    double std = 0.0;
    std::size_t n_components = 0;   // N_m, valid simulated locations
    std::size_t n_sampled = 0;      // grid locations, valid or not
    std::size_t partial_locations = 0;  // locations renormalized because coverage < 1
    std::optional<GaussianMixture> components;
    std::optional<std::vector<LocationSupport>> support;
};

// Mean f^T mu and variance f^T Sigma f of a normalized support.
[[nodiscard]] GaussianMoment support_moment(const BlockModel& model, const CovarianceModel& cov,
                                            const LocationSupport& support);

/// Bucket content at a single placement: every block on `bench` that the
/// sphere touches contributes its volume fraction.
[[nodiscard]] LocationEstimate estimate_at_location(const SampledLocation& location, const BucketShape& bucket,
                                                    const BlockModel& model, const CovarianceModel& cov,
                                                    std::string_view bench);

/// Estimates buckets, and hands the per-location supports to truck and dump
/// propagation. `warm` precomputes sphere/block intersections for every grid
/// point the given digs will sample; the cache is read-only afterwards, so
/// const methods are safe to call concurrently.
class BucketEstimator {
public:
    BucketEstimator(const BlockModel& model, const CovarianceModel& cov, EstimatorConfig config);

    void warm(std::span<const DigEvent> digs, int workers);

    // Throws EstimationError carrying the dig id when no location is valid.
    [[nodiscard]] BucketEstimate estimate(const DigEvent& dig) const;

    struct SupportedLocation {
        SampledLocation location;
        LocationSupport support;
    };

    // Valid, normalized supports in lexicographic location order.
    [[nodiscard]] std::vector<LocationSupport> support(const DigEvent& dig) const;
    [[nodiscard]] std::vector<SupportedLocation> supported_locations(const DigEvent& dig) const;

    [[nodiscard]] const BlockModel& model() const noexcept { return model_; }
    [[nodiscard]] const CovarianceModel& covariance() const noexcept { return cov_; }
    [[nodiscard]] const EstimatorConfig& config() const noexcept { return config_; }
    [[nodiscard]] const BucketShape& bucket() const noexcept { return bucket_; }
    [[nodiscard]] std::size_t cache_size() const noexcept { return cache_.size(); }

    // Sampled grid locations of a dig (lexicographic). Throws like
    // sample_dig_locations; also throws EstimationError for a missing position.
    [[nodiscard]] std::vector<SampledLocation> locations(const DigEvent& dig) const;

private:
    struct Key {
        std::size_t bench;
        std::array<std::int64_t, 3> grid;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };
    struct Entry {
        LocationSupport raw;
        GaussianMoment moment;  // of the full normalized support
    };

    struct Evaluated {
        SampledLocation location;
        LocationSupport support;
        GaussianMoment moment;
        bool partial = false;
    };

    [[nodiscard]] std::size_t bench_slot(const std::string& bench) const;
    [[nodiscard]] Entry compute_entry(const SampledLocation& location, const std::string& bench) const;
    [[nodiscard]] std::vector<Evaluated> evaluate(const DigEvent& dig, bool need_moments,
                                                std::size_t* n_sampled = nullptr) const;

    const BlockModel& model_;
    CovarianceModel cov_;
    EstimatorConfig config_;
    BucketShape bucket_;
    std::vector<std::string> benches_;
    std::unordered_map<Key, Entry, KeyHash> cache_;
};

// Convenience wrapper: builds an uncached estimator for one dig.
[[nodiscard]] BucketEstimate estimate_bucket(const DigEvent& dig, const BlockModel& model, const CovarianceModel& cov,
                                             const EstimatorConfig& config);

// Component weights for the simulated locations: 1/N, or normalized inverse
// squared distance to the recorded dig. Zero distances take the smallest
// positive distance in the set.
[[nodiscard]] std::vector<double> location_weights(std::span<const double> distances, WeightMode mode);

}  // namespace gradeprop
