#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradeprop/block_model.hpp"
#include "gradeprop/bucket_estimator.hpp"
#include "gradeprop/haul_propagation.hpp"
#include "gradeprop/records.hpp"

namespace gradeprop {

/// Synthetic bench: an axis-aligned sub-block grid split in y into a
/// high-grade region (centroid y < split_y) and a low-grade region, with dig
/// events swept in rows from south to north.
struct ScenarioSpec {
    Vec3 origin{0.0, 0.0, 0.0};        // bench minimum corner
    Vec3 extent{200.0, 200.0, 10.0};   // bench size (m)
    Vec3 block_size{2.0, 2.0, 2.0};
    std::string bench_id = "X10";

    double split_y = 100.0;
    double high_mean = 62.0;
    double low_mean = 45.0;
    double high_std = 0.5;
    double low_std = 1.0;
    double transition_band = 0.0;  // width of the linear blend across split_y

    // Dig path: rows along x starting at (dig_x0, dig_y0), advancing north.
    double dig_x0 = 40.0;
    double dig_y0 = 58.0;
    double row_length = 120.0;
    double along_spacing = 1.5;
    double row_spacing = 2.0;
    std::size_t n_digs = 3477;
    double dig_z_min = 2.0;
    double dig_z_max = 8.0;
    double jitter_xy = 0.5;

    double start_time = 1.6e9;
    double seconds_per_bucket = 40.0;
    std::size_t buckets_per_truck = 10;
    std::size_t trucks_per_dump = 35;

    CovarianceModel kernel;
    std::uint64_t seed = 42;

    // Throws ArgumentError.
    void validate() const;

    // 200 x 200 x 10 m bench of 2 m blocks (50,000 blocks), 3477 digs,
    // 348 trucks, 10 dumps.
    static ScenarioSpec reference();
};

struct Scenario {
    BlockModel model;
    std::vector<DigEvent> digs;
    std::vector<HaulCycle> cycles;
};

[[nodiscard]] Scenario generate_scenario(const ScenarioSpec& spec);

struct OracleConfig {
    std::size_t n_samples = 100000;  // at least 10000
    std::uint64_t seed = 1;
    std::size_t partitions = 16;  // fixed split of the sample index range
    int workers = 1;
};

struct OracleResult {
    double mean = 0.0;
    double std = 0.0;
    double se_mean = 0.0;
    double se_std = 0.0;
    std::size_t n_samples = 0;
};

/// Monte-Carlo reference for a bucket: each sample picks a simulated location
/// (uniformly, or by the configured location weights), draws a joint grade
/// realization of its blocks from N(mu, Sigma), and records the
/// volume-weighted grade.
[[nodiscard]] OracleResult mc_oracle_bucket(const DigEvent& dig, const BucketEstimator& estimator,
                                            const OracleConfig& config);

/// Monte-Carlo reference for a truck: each sample picks a simulation index j,
/// draws one realization shared by all blocks under the buckets' j-th
/// locations, and averages the bucket grades.
[[nodiscard]] OracleResult mc_oracle_truck(std::span<const BucketSupport> buckets, const BlockModel& model,
                                           const CovarianceModel& cov, const OracleConfig& config);

/// Symmetric square root factor L (Sigma = L L^T) by eigendecomposition.
/// Eigenvalues in [-1e-9, 0) are clamped to zero; lower ones throw
/// NumericalError.
[[nodiscard]] Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& sigma);

}  // namespace gradeprop
