#include "gradeprop/bucket_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradeprop/errors.hpp"
#include "gradeprop/parallel.hpp"

namespace gradeprop {

namespace {

constexpr double kCoverageTolerance = 1e-9;

}  // namespace

void EstimatorConfig::validate() const {
    const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(r_xy_neighbor)) throw ArgumentError("r_xy_neighbor must be positive");
    if (!positive(r_xy_sampling)) throw ArgumentError("r_xy_sampling must be positive");
    if (!positive(grid_interval)) throw ArgumentError("grid_interval must be positive");
    if (!positive(bucket_volume)) throw ArgumentError("bucket_volume must be positive");
}

GaussianMoment support_moment(const BlockModel& model, const CovarianceModel& cov, const LocationSupport& support) {
    if (support.blocks.empty()) throw ArgumentError("support_moment on an empty support");
    double mean = 0.0;
    for (std::size_t i = 0; i < support.blocks.size(); ++i) {
        mean += support.fractions[i] * model.block(support.blocks[i]).mean_grade;
    }
    const double var = quadratic_form(model, cov, support.blocks, support.fractions);
    return {mean, std::max(var, 0.0)};
}

LocationEstimate estimate_at_location(const SampledLocation& location, const BucketShape& bucket,
                                      const BlockModel& model, const CovarianceModel& cov, std::string_view bench) {
    const double reach = bucket.radius() + model.max_half_diagonal_xy(bench) + 1e-9;
    const auto candidates = model.radius_neighbor_indices(location.position, reach, bench);
    const LocationSupport support = normalize(raw_intersections(location.position, bucket, model, candidates));
    if (support.blocks.empty()) throw OutsideModelError("bucket outside model: no block intersects the bucket");
    LocationEstimate out;
    out.moment = support_moment(model, cov, support);
    out.fractions = support.fractions;
    for (auto i : support.blocks) out.ids.push_back(model.block(i).id);
    return out;
}

std::vector<double> location_weights(std::span<const double> distances, WeightMode mode) {
    if (distances.empty()) throw ArgumentError("location_weights on an empty set");
    const std::size_t n = distances.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    if (mode == WeightMode::equal) return w;

    double floor = std::numeric_limits<double>::infinity();
    for (double d : distances) {
        if (d > 0.0) floor = std::min(floor, d);
    }
    if (!std::isfinite(floor)) return w;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = distances[j] > 0.0 ? distances[j] : floor;
        w[j] = 1.0 / (d * d);
        total += w[j];
    }
    for (double& v : w) v /= total;
    return w;
}

std::size_t BucketEstimator::KeyHash::operator()(const Key& k) const noexcept {
    std::size_t h = std::hash<std::size_t>{}(k.bench);
    for (auto g : k.grid) h = h * 1000003u ^ std::hash<std::int64_t>{}(g);
    return h;
}

BucketEstimator::BucketEstimator(const BlockModel& model, const CovarianceModel& cov, EstimatorConfig config)
    : model_(model), cov_(cov), config_(config), bucket_(config.bucket_volume), benches_(model.bench_ids()) {
    cov_.validate();
    config_.validate();
}

std::size_t BucketEstimator::bench_slot(const std::string& bench) const {
    auto it = std::lower_bound(benches_.begin(), benches_.end(), bench);
    return static_cast<std::size_t>(it - benches_.begin());
}

BucketEstimator::Entry BucketEstimator::compute_entry(const SampledLocation& location, const std::string& bench) const {
    const double reach = bucket_.radius() + model_.max_half_diagonal_xy(bench) + 1e-9;
    const auto candidates = model_.radius_neighbor_indices(location.position, reach, bench);
    Entry e;
    e.raw = raw_intersections(location.position, bucket_, model_, candidates);
    const LocationSupport normalized = normalize(e.raw);
    if (!normalized.blocks.empty()) e.moment = support_moment(model_, cov_, normalized);
    return e;
}

std::vector<SampledLocation> BucketEstimator::locations(const DigEvent& dig) const {
    if (!dig.position) throw EstimationError(dig.id, "dig " + std::to_string(dig.id) + ": missing dig position");
    if (!model_.has_bench(dig.bench_id)) {
        throw EstimationError(dig.id, "dig " + std::to_string(dig.id) + ": unknown bench '" + dig.bench_id + "'");
    }
    try {
        return sample_dig_locations(*dig.position, config_.grid_interval, config_.r_xy_sampling,
                                    model_.bench_extent(dig.bench_id));
    } catch (const SamplingError& e) {
        throw EstimationError(dig.id, "dig " + std::to_string(dig.id) + ": " + e.what());
    }
}

void BucketEstimator::warm(std::span<const DigEvent> digs, int workers) {
    std::vector<std::pair<Key, SampledLocation>> wanted;
    for (const auto& dig : digs) {
        std::vector<SampledLocation> locs;
        try {
            locs = locations(dig);
        } catch (const EstimationError&) {
            continue;  // reported when the bucket itself is estimated
        }
        const std::size_t slot = bench_slot(dig.bench_id);
        for (const auto& l : locs) {
            Key key{slot, l.grid};
            if (!cache_.contains(key)) wanted.emplace_back(key, l);
        }
    }
    std::sort(wanted.begin(), wanted.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.bench, a.first.grid) < std::tie(b.first.bench, b.first.grid);
    });
    wanted.erase(std::unique(wanted.begin(), wanted.end(),
                             [](const auto& a, const auto& b) { return a.first == b.first; }),
                 wanted.end());

    std::vector<Entry> entries(wanted.size());
    parallel_for(wanted.size(), workers, [&](std::size_t i) {
        entries[i] = compute_entry(wanted[i].second, benches_[wanted[i].first.bench]);
    });
    cache_.reserve(cache_.size() + wanted.size());
    for (std::size_t i = 0; i < wanted.size(); ++i) cache_.emplace(wanted[i].first, std::move(entries[i]));
}

std::vector<BucketEstimator::Evaluated> BucketEstimator::evaluate(const DigEvent& dig, bool need_moments,
                                                                  std::size_t* n_sampled) const {
    const auto locs = locations(dig);
    if (n_sampled) *n_sampled = locs.size();
    const auto allowed = model_.radius_neighbor_indices(*dig.position, config_.r_xy_neighbor, dig.bench_id);
    const std::size_t slot = bench_slot(dig.bench_id);

    std::vector<Evaluated> out;
    out.reserve(locs.size());
    Entry scratch;
    for (const auto& loc : locs) {
        const Entry* entry = nullptr;
        if (auto it = cache_.find(Key{slot, loc.grid}); it != cache_.end()) {
            entry = &it->second;
        } else {
            scratch = compute_entry(loc, dig.bench_id);
            entry = &scratch;
        }
        LocationSupport support = restrict_and_normalize(entry->raw, allowed);
        if (support.blocks.empty()) continue;

        Evaluated ev;
        ev.location = loc;
        ev.partial = support.coverage < 1.0 - kCoverageTolerance;
        if (need_moments) {
            ev.moment = support.blocks.size() == entry->raw.blocks.size() ? entry->moment
                                                                         : support_moment(model_, cov_, support);
        }
        ev.support = std::move(support);
        out.push_back(std::move(ev));
    }
    return out;
}

BucketEstimate BucketEstimator::estimate(const DigEvent& dig) const {
    std::size_t n_sampled = 0;
    auto evals = evaluate(dig, true, &n_sampled);
    if (evals.empty()) {
        throw EstimationError(dig.id, "dig " + std::to_string(dig.id) + ": no simulated location intersects the model");
    }
    std::vector<GaussianMoment> moments;
    std::vector<double> distances;
    moments.reserve(evals.size());
    distances.reserve(evals.size());
    BucketEstimate out;
    out.dig_event_id = dig.id;
    out.n_sampled = n_sampled;
    for (const auto& ev : evals) {
        moments.push_back(ev.moment);
        distances.push_back(ev.location.distance_to_recorded);
        if (ev.partial) ++out.partial_locations;
    }
    GaussianMixture mix = config_.weight_mode == WeightMode::equal
                              ? GaussianMixture::equal_weights(moments)
                              : GaussianMixture::normalized(location_weights(distances, config_.weight_mode), moments);
    out.matched = moment_match(mix);
    out.std = out.matched.std_dev();
    out.n_components = mix.size();
    if (config_.retain_components) out.components = std::move(mix);
    if (config_.retain_support) {
        std::vector<LocationSupport> support;
        support.reserve(evals.size());
        for (auto& ev : evals) support.push_back(std::move(ev.support));
        out.support = std::move(support);
    }
    return out;
}

std::vector<LocationSupport> BucketEstimator::support(const DigEvent& dig) const {
    auto evals = evaluate(dig, false);
    std::vector<LocationSupport> out;
    out.reserve(evals.size());
    for (auto& ev : evals) out.push_back(std::move(ev.support));
    return out;
}

std::vector<BucketEstimator::SupportedLocation> BucketEstimator::supported_locations(const DigEvent& dig) const {
    auto evals = evaluate(dig, false);
    std::vector<SupportedLocation> out;
    out.reserve(evals.size());
    for (auto& ev : evals) out.push_back({ev.location, std::move(ev.support)});
    return out;
}

BucketEstimate estimate_bucket(const DigEvent& dig, const BlockModel& model, const CovarianceModel& cov,
                               const EstimatorConfig& config) {
    return BucketEstimator(model, cov, config).estimate(dig);
}

}  // namespace gradeprop
