#include "gradeprop/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gradeprop/errors.hpp"

namespace gradeprop {

namespace {

double radical_inverse(std::uint64_t index, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

// Squared distance from p to the closed box [lo, hi].
double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::max({lo[a] - p[a], 0.0, p[a] - hi[a]});
        d2 += d * d;
    }
    return d2;
}

double fraction_of(const BallPointSet& points, double radius, const Vec3& center, const Block& block) {
    const Vec3 lo = block.min_corner();
    const Vec3 hi = block.max_corner();
    if (!(block.volume() > 0.0)) return 0.0;
    if (box_distance2(center, lo, hi) >= radius * radius) return 0.0;
    if (((center.array() - radius) >= lo.array()).all() && ((center.array() + radius) <= hi.array()).all()) {
        return 1.0;
    }
    const Vec3 ulo = (lo - center) / radius;
    const Vec3 uhi = (hi - center) / radius;
    return static_cast<double>(points.count_in_box(ulo, uhi)) / static_cast<double>(BallPointSet::kSize);
}

}  // namespace

BucketShape::BucketShape(double volume_m3) : volume_(volume_m3) {
    if (!(volume_m3 > 0.0) || !std::isfinite(volume_m3)) {
        throw ArgumentError("bucket volume must be positive");
    }
    radius_ = std::cbrt(3.0 * volume_m3 / (4.0 * std::numbers::pi));
}

BallPointSet::BallPointSet() {
    x_.resize(kSize);
    y_.resize(kSize);
    z_.resize(kSize);
    for (std::size_t i = 0; i < kSize; ++i) {
        const double u = radical_inverse(i + 1, 2);
        const double v = radical_inverse(i + 1, 3);
        const double w = radical_inverse(i + 1, 5);
        const double r = std::cbrt(u);
        const double cos_t = 1.0 - 2.0 * v;
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        const double phi = 2.0 * std::numbers::pi * w;
        x_[i] = r * sin_t * std::cos(phi);
        y_[i] = r * sin_t * std::sin(phi);
        z_[i] = r * cos_t;
    }
}

const BallPointSet& BallPointSet::instance() {
    static const BallPointSet points;
    return points;
}

std::size_t BallPointSet::count_in_box(const Vec3& lo, const Vec3& hi) const {
    const double lx = lo.x(), ly = lo.y(), lz = lo.z();
    const double hx = hi.x(), hy = hi.y(), hz = hi.z();
    const double* px = x_.data();
    const double* py = y_.data();
    const double* pz = z_.data();
    std::size_t count = 0;
    for (std::size_t i = 0; i < kSize; ++i) {
        count += static_cast<std::size_t>((px[i] >= lx) & (px[i] < hx) & (py[i] >= ly) & (py[i] < hy) &
                                          (pz[i] >= lz) & (pz[i] < hz));
    }
    return count;
}

double intersection_fraction(const BucketShape& bucket, const Vec3& center, const Block& block) {
    return fraction_of(BallPointSet::instance(), bucket.radius(), center, block);
}

std::vector<SampledLocation> sample_dig_locations(const Vec3& recorded, double grid_interval, double r_xy,
                                                  const BenchExtent& bench) {
    if (!(grid_interval > 0.0) || !std::isfinite(grid_interval)) throw ArgumentError("grid_interval must be positive");
    if (!(r_xy > 0.0) || !std::isfinite(r_xy)) throw ArgumentError("r_xy must be positive");
    if (!(bench.z_min < bench.z_max)) throw ArgumentError("bench requires z_min < z_max");
    if (!recorded.allFinite()) throw ArgumentError("non-finite dig position");

    constexpr double eps = 1e-9;
    const auto lo = [&](double v) { return static_cast<std::int64_t>(std::ceil(v / grid_interval - eps)); };
    const auto hi = [&](double v) { return static_cast<std::int64_t>(std::floor(v / grid_interval + eps)); };

    const double r2 = r_xy * r_xy;
    std::vector<SampledLocation> out;
    for (auto ix = lo(recorded.x() - r_xy); ix <= hi(recorded.x() + r_xy); ++ix) {
        const double x = static_cast<double>(ix) * grid_interval;
        for (auto iy = lo(recorded.y() - r_xy); iy <= hi(recorded.y() + r_xy); ++iy) {
            const double y = static_cast<double>(iy) * grid_interval;
            const double dx = x - recorded.x();
            const double dy = y - recorded.y();
            if (dx * dx + dy * dy >= r2) continue;
            for (auto iz = lo(bench.z_min); iz <= hi(bench.z_max); ++iz) {
                SampledLocation s;
                s.position = Vec3(x, y, static_cast<double>(iz) * grid_interval);
                s.distance_to_recorded = (s.position - recorded).norm();
                s.grid = {ix, iy, iz};
                out.push_back(s);
            }
        }
    }
    if (out.empty()) {
        throw SamplingError("no sampled locations: grid interval too coarse or r_xy too small");
    }
    return out;
}

LocationSupport raw_intersections(const Vec3& center, const BucketShape& bucket, const BlockModel& model,
                                  std::span<const BlockIndex> candidates) {
    const auto& points = BallPointSet::instance();
    LocationSupport out;
    std::vector<BlockIndex> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());
    for (auto idx : sorted) {
        const double f = fraction_of(points, bucket.radius(), center, model.block(idx));
        if (f > 0.0) {
            out.blocks.push_back(idx);
            out.fractions.push_back(f);
            out.coverage += f;
        }
    }
    return out;
}

LocationSupport restrict_and_normalize(const LocationSupport& raw, std::span<const BlockIndex> allowed) {
    LocationSupport out;
    for (std::size_t i = 0; i < raw.blocks.size(); ++i) {
        if (std::binary_search(allowed.begin(), allowed.end(), raw.blocks[i])) {
            out.blocks.push_back(raw.blocks[i]);
            out.fractions.push_back(raw.fractions[i]);
            out.coverage += raw.fractions[i];
        }
    }
    if (out.coverage > 0.0) {
        for (double& f : out.fractions) f /= out.coverage;
    } else {
        out.blocks.clear();
        out.fractions.clear();
    }
    return out;
}

LocationSupport normalize(const LocationSupport& raw) {
    LocationSupport out = raw;
    out.coverage = 0.0;
    for (double f : raw.fractions) out.coverage += f;
    if (out.coverage > 0.0) {
        for (double& f : out.fractions) f /= out.coverage;
    }
    return out;
}

VolumeFractions volume_fractions(const Vec3& center, const BucketShape& bucket, const BlockModel& model,
                                 std::span<const BlockId> candidate_ids) {
    std::vector<BlockIndex> idx;
    idx.reserve(candidate_ids.size());
    for (auto id : candidate_ids) idx.push_back(model.index_of(id));
    const LocationSupport support = normalize(raw_intersections(center, bucket, model, idx));
    if (support.blocks.empty()) throw OutsideModelError("bucket outside model: no candidate block intersects");
    VolumeFractions out;
    out.coverage = support.coverage;
    out.fractions = support.fractions;
    for (auto i : support.blocks) out.ids.push_back(model.block(i).id);
    return out;
}

}  // namespace gradeprop
