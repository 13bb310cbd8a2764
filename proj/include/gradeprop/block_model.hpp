#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gradeprop/kdtree.hpp"

namespace gradeprop {

using Vec3 = Eigen::Vector3d;
using BlockId = std::int64_t;
// Position of a block inside BlockModel::blocks(). Blocks are stored sorted by
// id, so ascending indices are ascending ids.
using BlockIndex = std::uint32_t;

struct Block {
    BlockId id = 0;
    Vec3 centroid = Vec3::Zero();
    Vec3 dims = Vec3::Ones();  // dx, dy, dz (m)
    double mean_grade = 0.0;   // Fe wt%
    double std_grade = 0.0;    // Fe wt%
    std::string bench_id;

    [[nodiscard]] Vec3 min_corner() const { return centroid - 0.5 * dims; }
    [[nodiscard]] Vec3 max_corner() const { return centroid + 0.5 * dims; }
    [[nodiscard]] double volume() const { return dims.prod(); }
};

// Throws DataError if the block breaks an invariant.
void validate(const Block& block);

struct BenchExtent {
    double z_min = 0.0;
    double z_max = 0.0;
};

/// Anisotropic squared-exponential covariance between blocks:
///
///   eps_ij = amplitude * std_i * std_j * exp(-0.5 * sum_a (d_a / l_a)^2)
///            + [i == j] * (noise + jitter)
///
/// where d is the centroid separation.
struct CovarianceModel {
    std::array<double, 3> length_scales{15.0, 15.0, 5.0};
    double amplitude = 1.0;
    double noise = 0.0;
    double jitter = 1e-8;

    // Throws ArgumentError on non-positive scales/amplitude or negative noise/jitter.
    void validate() const;

    [[nodiscard]] double correlation(const Vec3& delta) const;
    [[nodiscard]] double diagonal_extra() const { return noise + jitter; }
};

/// Prior sub-block model with a per-bench planar KD-tree over centroids.
/// Immutable after construction.
class BlockModel {
public:
    BlockModel() = default;
    // Validates every block and the unique-id invariant; throws DataError.
    explicit BlockModel(std::vector<Block> blocks);

    [[nodiscard]] std::span<const Block> blocks() const noexcept { return blocks_; }
    [[nodiscard]] std::size_t size() const noexcept { return blocks_.size(); }
    [[nodiscard]] bool empty() const noexcept { return blocks_.empty(); }

    [[nodiscard]] std::optional<BlockIndex> find(BlockId id) const;
    // Throws ArgumentError for an unknown id.
    [[nodiscard]] BlockIndex index_of(BlockId id) const;
    [[nodiscard]] const Block& block(BlockIndex index) const { return blocks_[index]; }

    [[nodiscard]] std::vector<std::string> bench_ids() const;
    [[nodiscard]] bool has_bench(std::string_view bench) const;
    // Throws ArgumentError for an unknown bench.
    [[nodiscard]] BenchExtent bench_extent(std::string_view bench) const;
    // Bench whose [z_min, z_max) holds z (the topmost bench also owns its
    // z_max); otherwise the bench nearest in z. Empty model gives nullopt.
    [[nodiscard]] std::optional<std::string> bench_at(double z) const;
    // Largest horizontal half-diagonal of any block on the bench.
    [[nodiscard]] double max_half_diagonal_xy(std::string_view bench) const;

    /// Ids of all blocks on the query's bench whose centroid lies strictly
    /// within horizontal distance r_xy of the query. The z coordinate only
    /// selects the bench; the whole vertical column is returned. Sorted.
    [[nodiscard]] std::vector<BlockId> radius_neighbors(const Vec3& query, double r_xy) const;
    [[nodiscard]] std::vector<BlockId> radius_neighbors(const Vec3& query, double r_xy,
                                                        std::string_view bench) const;
    // Same query, returning sorted block indices.
    [[nodiscard]] std::vector<BlockIndex> radius_neighbor_indices(const Vec3& query, double r_xy,
                                                                  std::string_view bench) const;

private:
    struct Bench {
        std::string id;
        BenchExtent extent;
        double max_half_diag_xy = 0.0;
        KdTree2d index;
    };

    const Bench& bench(std::string_view id) const;

    std::vector<Block> blocks_;
    std::vector<Bench> benches_;  // sorted by id
};

/// Dense covariance over `ids` (in the given order).
[[nodiscard]] Eigen::MatrixXd block_covariance(const BlockModel& model, const CovarianceModel& cov,
                                               std::span<const BlockId> ids);
[[nodiscard]] Eigen::MatrixXd block_covariance_by_index(const BlockModel& model, const CovarianceModel& cov,
                                                        std::span<const BlockIndex> indices);

enum class QuadraticRoute { automatic, pairwise, separable };

/// w^T Sigma w for the blocks `indices` without forming Sigma. The separable
/// route factors the squared-exponential kernel per axis and contracts a dense
/// tensor over the distinct centroid coordinates; `automatic` picks it when
/// that tensor is small relative to the number of blocks.
[[nodiscard]] double quadratic_form(const BlockModel& model, const CovarianceModel& cov,
                                    std::span<const BlockIndex> indices, std::span<const double> weights,
                                    QuadraticRoute route = QuadraticRoute::automatic);

}  // namespace gradeprop
