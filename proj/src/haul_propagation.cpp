#include "gradeprop/haul_propagation.hpp"

#include <algorithm>
#include <limits>

#include "gradeprop/errors.hpp"
#include "gradeprop/parallel.hpp"

namespace gradeprop {

std::size_t simulation_count(std::span<const BucketSupport> buckets) {
    if (buckets.empty()) return 0;
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& b : buckets) m = std::min(m, b.size());
    return m;
}

LocationSupport pooled_weights(std::size_t j, std::span<const BucketSupport> buckets) {
    if (buckets.empty()) throw ArgumentError("pooled_weights needs at least one bucket");
    const double scale = 1.0 / static_cast<double>(buckets.size());
    std::vector<std::pair<BlockIndex, double>> parts;
    for (const auto& bucket : buckets) {
        if (j >= bucket.size()) throw ArgumentError("simulation index beyond a bucket's sampled locations");
        const auto& s = bucket[j];
        for (std::size_t i = 0; i < s.blocks.size(); ++i) parts.emplace_back(s.blocks[i], s.fractions[i] * scale);
    }
    std::stable_sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    LocationSupport out;
    for (const auto& [block, w] : parts) {
        if (!out.blocks.empty() && out.blocks.back() == block) {
            out.fractions.back() += w;
        } else {
            out.blocks.push_back(block);
            out.fractions.push_back(w);
        }
    }
    for (double f : out.fractions) out.coverage += f;
    return out;
}

GaussianMoment simulate_truck_value(std::size_t j, std::span<const BucketSupport> buckets, const BlockModel& model,
                                    const CovarianceModel& cov) {
    const LocationSupport w = pooled_weights(j, buckets);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.blocks.size(); ++i) mean += w.fractions[i] * model.block(w.blocks[i]).mean_grade;
    const double var = quadratic_form(model, cov, w.blocks, w.fractions);
    return {mean, std::max(var, 0.0)};
}

GaussianMoment pooled_estimate(std::span<const BucketSupport> buckets, const BlockModel& model,
                               const CovarianceModel& cov, int workers) {
    const std::size_t m = simulation_count(buckets);
    if (m == 0) throw ArgumentError("pooled_estimate: no simulations available");
    std::vector<GaussianMoment> sims(m);
    parallel_for(m, workers, [&](std::size_t j) { sims[j] = simulate_truck_value(j, buckets, model, cov); });
    return moment_match(GaussianMixture::equal_weights(sims));
}

TruckEstimate estimate_truck(TruckId truck_id, std::span<const BucketSupport> buckets, const BlockModel& model,
                             const CovarianceModel& cov, int workers) {
    if (buckets.empty()) throw EstimationError(truck_id, "truck " + std::to_string(truck_id) + ": no buckets");
    const std::size_t m = simulation_count(buckets);
    if (m == 0) {
        throw EstimationError(truck_id,
                              "truck " + std::to_string(truck_id) + ": a bucket has no valid simulated location");
    }
    TruckEstimate out;
    out.truck_id = truck_id;
    out.matched = pooled_estimate(buckets, model, cov, workers);
    out.std = out.matched.std_dev();
    out.n_buckets = buckets.size();
    out.n_simulations = m;
    return out;
}

DumpEstimate estimate_dump_correlated(const std::string& dump_id, std::span<const BucketSupport> buckets,
                                      std::size_t n_trucks, const BlockModel& model, const CovarianceModel& cov,
                                      int workers) {
    if (buckets.empty()) throw EstimationError(0, "dump " + dump_id + ": no buckets");
    const std::size_t m = simulation_count(buckets);
    if (m == 0) throw EstimationError(0, "dump " + dump_id + ": a bucket has no valid simulated location");
    DumpEstimate out;
    out.dump_id = dump_id;
    out.mode = DumpMode::correlated;
    out.matched = pooled_estimate(buckets, model, cov, workers);
    out.std = out.matched.std_dev();
    out.n_trucks = n_trucks;
    out.n_buckets = buckets.size();
    out.n_simulations = m;
    return out;
}

DumpEstimate estimate_dump_window(const std::string& dump_id, std::span<const GaussianMoment> trucks,
                                  std::int64_t window_index) {
    if (trucks.empty()) throw WindowError("dump " + dump_id + ": no truck in window");
    DumpEstimate out;
    out.dump_id = dump_id;
    out.mode = DumpMode::window;
    out.window_index = window_index;
    out.matched = moment_match(GaussianMixture::equal_weights(trucks));
    out.std = out.matched.std_dev();
    out.n_trucks = trucks.size();
    out.n_simulations = trucks.size();
    return out;
}

}  // namespace gradeprop
