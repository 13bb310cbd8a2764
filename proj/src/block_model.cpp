#include "gradeprop/block_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "gradeprop/errors.hpp"

namespace gradeprop {

void validate(const Block& block) {
    const auto where = [&] { return "block " + std::to_string(block.id) + ": "; };
    if (!block.centroid.allFinite() || !block.dims.allFinite()) {
        throw DataError(where() + "non-finite geometry");
    }
    if ((block.dims.array() <= 0.0).any()) {
        throw DataError(where() + "dims must be strictly positive");
    }
    if (!std::isfinite(block.mean_grade) || !std::isfinite(block.std_grade)) {
        throw DataError(where() + "non-finite grade moments");
    }
    if (block.std_grade < 0.0) throw DataError(where() + "negative std_fe");
    if (block.mean_grade < 0.0 || block.mean_grade > 100.0) {
        throw DataError(where() + "mean_fe outside [0, 100]");
    }
    if (block.bench_id.empty()) throw DataError(where() + "empty bench id");
}

void CovarianceModel::validate() const {
    for (double l : length_scales) {
        if (!(l > 0.0) || !std::isfinite(l)) throw ArgumentError("length scales must be positive and finite");
    }
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw ArgumentError("amplitude must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ArgumentError("noise must be >= 0");
    if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ArgumentError("jitter must be >= 0");
}

double CovarianceModel::correlation(const Vec3& delta) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double u = delta[a] / length_scales[a];
        s += u * u;
    }
    return std::exp(-0.5 * s);
}

BlockModel::BlockModel(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.size() > std::numeric_limits<BlockIndex>::max()) {
        throw DataError("too many blocks");
    }
    for (const auto& b : blocks_) validate(b);
    std::sort(blocks_.begin(), blocks_.end(), [](const Block& a, const Block& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < blocks_.size(); ++i) {
        if (blocks_[i].id == blocks_[i - 1].id) {
            throw DataError("duplicate block id " + std::to_string(blocks_[i].id));
        }
    }

    std::map<std::string, std::vector<KdTree2d::Point>> points;
    std::map<std::string, Bench> benches;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        auto [it, inserted] = benches.try_emplace(b.bench_id);
        Bench& bench = it->second;
        const double lo = b.min_corner().z();
        const double hi = b.max_corner().z();
        if (inserted) {
            bench.id = b.bench_id;
            bench.extent = {lo, hi};
        } else {
            bench.extent.z_min = std::min(bench.extent.z_min, lo);
            bench.extent.z_max = std::max(bench.extent.z_max, hi);
        }
        bench.max_half_diag_xy = std::max(bench.max_half_diag_xy, 0.5 * std::hypot(b.dims.x(), b.dims.y()));
        points[b.bench_id].push_back({b.centroid.x(), b.centroid.y(), static_cast<BlockIndex>(i)});
    }
    for (auto& [id, bench] : benches) {
        bench.index = KdTree2d(std::move(points[id]));
        benches_.push_back(std::move(bench));
    }
}

std::optional<BlockIndex> BlockModel::find(BlockId id) const {
    auto it = std::lower_bound(blocks_.begin(), blocks_.end(), id,
                               [](const Block& b, BlockId v) { return b.id < v; });
    if (it == blocks_.end() || it->id != id) return std::nullopt;
    return static_cast<BlockIndex>(it - blocks_.begin());
}

BlockIndex BlockModel::index_of(BlockId id) const {
    auto idx = find(id);
    if (!idx) throw ArgumentError("unknown block id " + std::to_string(id));
    return *idx;
}

std::vector<std::string> BlockModel::bench_ids() const {
    std::vector<std::string> out;
    out.reserve(benches_.size());
    for (const auto& b : benches_) out.push_back(b.id);
    return out;
}

bool BlockModel::has_bench(std::string_view id) const {
    auto it = std::lower_bound(benches_.begin(), benches_.end(), id,
                               [](const Bench& b, std::string_view v) { return std::string_view(b.id) < v; });
    return it != benches_.end() && it->id == id;
}

const BlockModel::Bench& BlockModel::bench(std::string_view id) const {
    auto it = std::lower_bound(benches_.begin(), benches_.end(), id,
                               [](const Bench& b, std::string_view v) { return std::string_view(b.id) < v; });
    if (it == benches_.end() || it->id != id) {
        throw ArgumentError("unknown bench '" + std::string(id) + "'");
    }
    return *it;
}

BenchExtent BlockModel::bench_extent(std::string_view id) const { return bench(id).extent; }

double BlockModel::max_half_diagonal_xy(std::string_view id) const { return bench(id).max_half_diag_xy; }

std::optional<std::string> BlockModel::bench_at(double z) const {
    if (benches_.empty()) return std::nullopt;
    const Bench* best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& b : benches_) top = std::max(top, b.extent.z_max);
    for (const auto& b : benches_) {
        const bool inside = (z >= b.extent.z_min && z < b.extent.z_max) || (z == b.extent.z_max && z == top);
        if (inside) return b.id;
        const double gap = z < b.extent.z_min ? b.extent.z_min - z : z - b.extent.z_max;
        if (gap < best_gap) {
            best_gap = gap;
            best = &b;
        }
    }
    return best->id;
}

std::vector<BlockIndex> BlockModel::radius_neighbor_indices(const Vec3& query, double r_xy,
                                                            std::string_view bench_id) const {
    if (!(r_xy > 0.0) || !std::isfinite(r_xy)) throw ArgumentError("r_xy must be positive");
    if (!query.allFinite()) throw ArgumentError("non-finite query position");
    std::vector<BlockIndex> out;
    bench(bench_id).index.radius_query(query.x(), query.y(), r_xy, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<BlockId> BlockModel::radius_neighbors(const Vec3& query, double r_xy, std::string_view bench_id) const {
    const auto idx = radius_neighbor_indices(query, r_xy, bench_id);
    std::vector<BlockId> ids;
    ids.reserve(idx.size());
    for (auto i : idx) ids.push_back(blocks_[i].id);
    return ids;
}

std::vector<BlockId> BlockModel::radius_neighbors(const Vec3& query, double r_xy) const {
    if (!(r_xy > 0.0) || !std::isfinite(r_xy)) throw ArgumentError("r_xy must be positive");
    const auto b = bench_at(query.z());
    if (!b) return {};
    return radius_neighbors(query, r_xy, *b);
}

Eigen::MatrixXd block_covariance_by_index(const BlockModel& model, const CovarianceModel& cov,
                                          std::span<const BlockIndex> indices) {
    if (indices.empty()) throw ArgumentError("block_covariance needs at least one block");
    const auto n = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Block& bi = model.block(indices[i]);
        if (!bi.centroid.allFinite() || !std::isfinite(bi.std_grade)) {
            throw DataError("non-finite centroid or std for block " + std::to_string(bi.id));
        }
        sigma(i, i) = cov.amplitude * bi.std_grade * bi.std_grade + cov.diagonal_extra();
        for (Eigen::Index k = 0; k < i; ++k) {
            const Block& bk = model.block(indices[k]);
            const double v = cov.amplitude * (bi.std_grade * bk.std_grade) *
                             cov.correlation(bi.centroid - bk.centroid);
            sigma(i, k) = v;
            sigma(k, i) = v;
        }
    }
    return sigma;
}

Eigen::MatrixXd block_covariance(const BlockModel& model, const CovarianceModel& cov, std::span<const BlockId> ids) {
    std::vector<BlockIndex> idx;
    idx.reserve(ids.size());
    for (auto id : ids) idx.push_back(model.index_of(id));
    return block_covariance_by_index(model, cov, idx);
}

namespace {

double quadratic_pairwise(const BlockModel& model, const CovarianceModel& cov, std::span<const BlockIndex> indices,
                          std::span<const double> weights) {
    const std::size_t n = indices.size();
    std::vector<double> sx(n), sy(n), sz(n), u(n);
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Block& b = model.block(indices[i]);
        sx[i] = b.centroid.x() / cov.length_scales[0];
        sy[i] = b.centroid.y() / cov.length_scales[1];
        sz[i] = b.centroid.z() / cov.length_scales[2];
        u[i] = weights[i] * b.std_grade;
        diag += u[i] * u[i];
    }
    double off = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        double row = 0.0;
        for (std::size_t k = 0; k < i; ++k) {
            const double dx = sx[i] - sx[k];
            const double dy = sy[i] - sy[k];
            const double dz = sz[i] - sz[k];
            row += u[k] * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
        }
        off += u[i] * row;
    }
    double w2 = 0.0;
    for (double w : weights) w2 += w * w;
    return cov.amplitude * (diag + 2.0 * off) + cov.diagonal_extra() * w2;
}

struct AxisGrid {
    std::vector<double> values;       // distinct sorted coordinates
    std::vector<std::uint32_t> slot;  // per block, index into values
};

AxisGrid axis_grid(const BlockModel& model, std::span<const BlockIndex> indices, int axis) {
    AxisGrid g;
    g.values.reserve(indices.size());
    for (auto i : indices) g.values.push_back(model.block(i).centroid[axis]);
    std::sort(g.values.begin(), g.values.end());
    g.values.erase(std::unique(g.values.begin(), g.values.end()), g.values.end());
    g.slot.reserve(indices.size());
    for (auto i : indices) {
        const double v = model.block(i).centroid[axis];
        g.slot.push_back(static_cast<std::uint32_t>(std::lower_bound(g.values.begin(), g.values.end(), v) -
                                                    g.values.begin()));
    }
    return g;
}

Eigen::MatrixXd axis_kernel(const std::vector<double>& values, double length) {
    const auto m = static_cast<Eigen::Index>(values.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        k(a, a) = 1.0;
        for (Eigen::Index b = 0; b < a; ++b) {
            const double d = (values[a] - values[b]) / length;
            k(a, b) = k(b, a) = std::exp(-0.5 * d * d);
        }
    }
    return k;
}

double quadratic_separable(const BlockModel& model, const CovarianceModel& cov, std::span<const BlockIndex> indices,
                           std::span<const double> weights, const AxisGrid& gx, const AxisGrid& gy,
                           const AxisGrid& gz) {
    const auto nx = static_cast<Eigen::Index>(gx.values.size());
    const auto ny = static_cast<Eigen::Index>(gy.values.size());
    const auto nz = static_cast<Eigen::Index>(gz.values.size());

    // U is laid out as nz slices of an (nx x ny) matrix.
    std::vector<Eigen::MatrixXd> u(nz, Eigen::MatrixXd::Zero(nx, ny));
    double w2 = 0.0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        u[gz.slot[i]](gx.slot[i], gy.slot[i]) += weights[i] * model.block(indices[i]).std_grade;
        w2 += weights[i] * weights[i];
    }
    const Eigen::MatrixXd kx = axis_kernel(gx.values, cov.length_scales[0]);
    const Eigen::MatrixXd ky = axis_kernel(gy.values, cov.length_scales[1]);
    const Eigen::MatrixXd kz = axis_kernel(gz.values, cov.length_scales[2]);

    // T_c = Kx U_c Ky, then V_c = sum_c' Kz(c, c') T_c', and Q = sum_c <U_c, V_c>.
    std::vector<Eigen::MatrixXd> t(nz);
    for (Eigen::Index c = 0; c < nz; ++c) t[c] = kx * u[c] * ky;
    double q = 0.0;
    for (Eigen::Index c = 0; c < nz; ++c) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(nx, ny);
        for (Eigen::Index c2 = 0; c2 < nz; ++c2) v += kz(c, c2) * t[c2];
        q += u[c].cwiseProduct(v).sum();
    }
    return cov.amplitude * q + cov.diagonal_extra() * w2;
}

}  // namespace

double quadratic_form(const BlockModel& model, const CovarianceModel& cov, std::span<const BlockIndex> indices,
                      std::span<const double> weights, QuadraticRoute route) {
    if (indices.size() != weights.size()) throw ArgumentError("quadratic_form: size mismatch");
    if (indices.empty()) throw ArgumentError("quadratic_form needs at least one block");
    if (route == QuadraticRoute::pairwise) return quadratic_pairwise(model, cov, indices, weights);

    const AxisGrid gx = axis_grid(model, indices, 0);
    const AxisGrid gy = axis_grid(model, indices, 1);
    const AxisGrid gz = axis_grid(model, indices, 2);
    const double cells = static_cast<double>(gx.values.size()) * static_cast<double>(gy.values.size()) *
                         static_cast<double>(gz.values.size());
    const double n = static_cast<double>(indices.size());
    // Contraction cost is about cells * (nx + ny + nz); pairwise is n^2 / 2 exps.
    const double separable_cost =
        cells * static_cast<double>(gx.values.size() + gy.values.size() + gz.values.size());
    if (route == QuadraticRoute::separable || (cells <= 16.0 * n + 64.0 && separable_cost < 4.0 * n * n)) {
        return quadratic_separable(model, cov, indices, weights, gx, gy, gz);
    }
    return quadratic_pairwise(model, cov, indices, weights);
}

}  // namespace gradeprop
