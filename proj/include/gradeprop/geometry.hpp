#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gradeprop/block_model.hpp"

namespace gradeprop {

// Spherical bucket of fixed volume.
class BucketShape {
public:
    // Throws ArgumentError unless volume > 0.
    explicit BucketShape(double volume_m3);

    [[nodiscard]] double volume() const noexcept { return volume_; }
    [[nodiscard]] double radius() const noexcept { return radius_; }

private:
    double volume_;
    double radius_;
};

struct SampledLocation {
    Vec3 position = Vec3::Zero();
    double distance_to_recorded = 0.0;
    // Integer grid coordinates; position == grid * interval.
    std::array<std::int64_t, 3> grid{0, 0, 0};
};

/// Fixed quasi-random point set of 4096 points in the unit ball (Halton
/// bases 2, 3, 5 mapped radially), stored as separate coordinate arrays.
class BallPointSet {
public:
    static constexpr std::size_t kSize = 4096;

    static const BallPointSet& instance();

    [[nodiscard]] std::span<const double> x() const { return x_; }
    [[nodiscard]] std::span<const double> y() const { return y_; }
    [[nodiscard]] std::span<const double> z() const { return z_; }

    // Number of points p with lo <= p < hi (componentwise, unit-ball frame).
    [[nodiscard]] std::size_t count_in_box(const Vec3& lo, const Vec3& hi) const;

private:
    BallPointSet();
    std::vector<double> x_, y_, z_;
};

/// Vol(sphere at `center` intersect block) / Vol(sphere). Exactly 0 when the
/// two are disjoint, exactly 1 when the sphere lies inside the block,
/// otherwise the fraction of BallPointSet points inside the block.
[[nodiscard]] double intersection_fraction(const BucketShape& bucket, const Vec3& center, const Block& block);

/// Grid points (spacing `grid_interval`, aligned to the origin) within
/// horizontal distance r_xy of `recorded` and with z inside `bench`,
/// ordered lexicographically by (x, y, z). Throws SamplingError if empty.
[[nodiscard]] std::vector<SampledLocation> sample_dig_locations(const Vec3& recorded, double grid_interval,
                                                                double r_xy, const BenchExtent& bench);

// Block weights of one bucket placement. `fractions` sum to 1; `coverage` is
// the raw intersected share of the bucket before renormalization.
struct VolumeFractions {
    std::vector<BlockId> ids;
    std::vector<double> fractions;
    double coverage = 0.0;
};

struct LocationSupport {
    std::vector<BlockIndex> blocks;
    std::vector<double> fractions;
    double coverage = 0.0;
};

/// Renormalized intersection fractions over the candidate blocks with a
/// positive intersection. Throws OutsideModelError if none intersect.
[[nodiscard]] VolumeFractions volume_fractions(const Vec3& center, const BucketShape& bucket, const BlockModel& model,
                                               std::span<const BlockId> candidate_ids);

// Raw (unnormalized) positive intersections among `candidates`, sorted by index.
[[nodiscard]] LocationSupport raw_intersections(const Vec3& center, const BucketShape& bucket, const BlockModel& model,
                                                std::span<const BlockIndex> candidates);

// Keeps entries of `raw` whose block is in `allowed` (sorted) and rescales the
// kept fractions to sum to 1. Returns an empty support when nothing is kept.
[[nodiscard]] LocationSupport restrict_and_normalize(const LocationSupport& raw, std::span<const BlockIndex> allowed);
[[nodiscard]] LocationSupport normalize(const LocationSupport& raw);

}  // namespace gradeprop
