#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradeprop/block_model.hpp"
#include "gradeprop/geometry.hpp"
#include "gradeprop/gmm.hpp"
#include "gradeprop/records.hpp"

namespace gradeprop {

// Valid normalized supports of one bucket, in lexicographic location order.
using BucketSupport = std::vector<LocationSupport>;

struct TruckEstimate {
    TruckId truck_id = 0;
    std::string dump_id;
    GaussianMoment matched;
    double std = 0.0;
    std::size_t n_buckets = 0;      // N, buckets that entered the estimate
    std::size_t n_simulations = 0;  // M = min over buckets of valid locations
    std::size_t n_unestimated = 0;  // buckets dropped for a missing dig position
    double arrival = 0.0;           // latest cycle timestamp
};

enum class DumpMode { correlated, window };

struct DumpEstimate {
    std::string dump_id;
    DumpMode mode = DumpMode::correlated;
    std::int64_t window_index = 0;
    GaussianMoment matched;
    double std = 0.0;
    std::size_t n_trucks = 0;
    std::size_t n_buckets = 0;
    std::size_t n_simulations = 0;
};

/// Block weights of the j-th simulated load: each bucket's j-th support scaled
/// by 1/N and summed per block. Fractions sum to 1.
[[nodiscard]] LocationSupport pooled_weights(std::size_t j, std::span<const BucketSupport> buckets);

/// One simulated load as a single Gaussian: mean w^T mu, variance w^T Sigma w
/// over the union of blocks touched by the buckets' j-th locations.
/// Requires j < min_i(buckets[i].size()).
[[nodiscard]] GaussianMoment simulate_truck_value(std::size_t j, std::span<const BucketSupport> buckets,
                                                  const BlockModel& model, const CovarianceModel& cov);

// Number of simulations M = min_i(n_i); 0 when any bucket has no support.
[[nodiscard]] std::size_t simulation_count(std::span<const BucketSupport> buckets);

/// Moment match of the M simulated loads with weights 1/M. Simulations are
/// evaluated on `workers` threads and reduced in index order.
[[nodiscard]] GaussianMoment pooled_estimate(std::span<const BucketSupport> buckets, const BlockModel& model,
                                             const CovarianceModel& cov, int workers = 1);

// Throws EstimationError (carrying truck_id) when there is no bucket or some
// bucket has no valid location.
[[nodiscard]] TruckEstimate estimate_truck(TruckId truck_id, std::span<const BucketSupport> buckets,
                                           const BlockModel& model, const CovarianceModel& cov, int workers = 1);

// Same machinery as a truck, pooling every bucket delivered to the dump.
[[nodiscard]] DumpEstimate estimate_dump_correlated(const std::string& dump_id, std::span<const BucketSupport> buckets,
                                                    std::size_t n_trucks, const BlockModel& model,
                                                    const CovarianceModel& cov, int workers = 1);

/// Independent aggregation of the trucks that reached a dump within one
/// window: moment match with weights 1/N. Throws WindowError when empty.
[[nodiscard]] DumpEstimate estimate_dump_window(const std::string& dump_id, std::span<const GaussianMoment> trucks,
                                                std::int64_t window_index = 0);

}  // namespace gradeprop
