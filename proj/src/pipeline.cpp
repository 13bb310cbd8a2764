#include "gradeprop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <variant>

#include "gradeprop/errors.hpp"
#include "gradeprop/parallel.hpp"

namespace gradeprop {

namespace {

struct StageStats {
    std::size_t count = 0;
    double mean = 0.0;      // weighted by buckets represented
    double mean_std = 0.0;  // plain average over entities
    double min_std = 0.0;
    double max_std = 0.0;
};

template <typename Items, typename Weight>
StageStats stage_stats(const Items& items, Weight weight) {
    StageStats s;
    s.count = items.size();
    if (items.empty()) return s;
    double wsum = 0.0;
    s.min_std = items.front().std;
    s.max_std = items.front().std;
    for (const auto& e : items) {
        const double w = weight(e);
        s.mean += w * e.matched.mean;
        wsum += w;
        s.mean_std += e.std;
        s.min_std = std::min(s.min_std, e.std);
        s.max_std = std::max(s.max_std, e.std);
    }
    s.mean /= wsum;
    s.mean_std /= static_cast<double>(items.size());
    return s;
}

nlohmann::json to_json(const StageStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"mean_std", s.mean_std}, {"min_std", s.min_std},
            {"max_std", s.max_std}};
}

std::string error_message(const std::exception& e) { return e.what(); }

}  // namespace

ReportBundle run_pipeline(const PipelineConfig& config, const Inputs& inputs) {
    config.validate();
    EstimatorConfig ec = config.estimator;
    ec.retain_components = config.plot_enabled;
    BucketEstimator estimator(inputs.model, config.kernel, ec);
    const int workers = config.workers;

    ReportBundle out;
    const auto& digs = inputs.digs;

    std::vector<DigEvent> located;
    for (const auto& d : digs) {
        if (d.position) located.push_back(d);
    }
    estimator.warm(located, workers);

    // Buckets.
    std::vector<std::variant<BucketEstimate, std::string>> bucket_results(digs.size());
    parallel_for(digs.size(), workers, [&](std::size_t i) {
        try {
            bucket_results[i] = estimator.estimate(digs[i]);
        } catch (const std::exception& e) {
            bucket_results[i] = error_message(e);
        }
    });
    std::vector<std::optional<std::size_t>> bucket_slot(digs.size());
    for (std::size_t i = 0; i < digs.size(); ++i) {
        if (auto* b = std::get_if<BucketEstimate>(&bucket_results[i])) {
            bucket_slot[i] = out.buckets.size();
            out.buckets.push_back(std::move(*b));
        } else {
            out.errors.push_back({"bucket", std::to_string(digs[i].id), std::get<std::string>(bucket_results[i])});
        }
    }
    const auto dig_index = [&](DigEventId id) {
        const auto it = std::lower_bound(digs.begin(), digs.end(), id,
                                         [](const DigEvent& d, DigEventId v) { return d.id < v; });
        return static_cast<std::size_t>(it - digs.begin());
    };

    // Trucks: cycles arrive sorted by truck, then time.
    struct TruckGroup {
        TruckId id;
        std::string dump_id;
        double arrival;
        std::vector<std::size_t> digs;
    };
    std::vector<TruckGroup> groups;
    for (const auto& c : inputs.cycles) {
        if (groups.empty() || groups.back().id != c.truck_id) groups.push_back({c.truck_id, c.dump_id, c.timestamp, {}});
        auto& g = groups.back();
        g.arrival = std::max(g.arrival, c.timestamp);
        g.digs.push_back(dig_index(c.dig_event_id));
    }

    struct TruckResult {
        std::optional<TruckEstimate> estimate;
        std::vector<BucketSupport> supports;
        std::string error;
    };
    std::vector<TruckResult> truck_results(groups.size());
    parallel_for(groups.size(), workers, [&](std::size_t t) {
        const auto& g = groups[t];
        auto& r = truck_results[t];
        std::size_t unestimated = 0;
        for (std::size_t i : g.digs) {
            if (!digs[i].position) {
                ++unestimated;
                continue;
            }
            if (!bucket_slot[i]) {
                r.error = "truck " + std::to_string(g.id) + ": bucket " + std::to_string(digs[i].id) +
                          " could not be estimated";
                r.supports.clear();
                return;
            }
            r.supports.push_back(estimator.support(digs[i]));
        }
        if (r.supports.empty()) {
            r.error = "truck " + std::to_string(g.id) + ": no bucket with a recorded position";
            return;
        }
        try {
            TruckEstimate e = estimate_truck(g.id, r.supports, inputs.model, config.kernel, 1);
            e.dump_id = g.dump_id;
            e.n_unestimated = unestimated;
            e.arrival = g.arrival;
            r.estimate = std::move(e);
        } catch (const std::exception& e) {
            r.error = error_message(e);
            r.supports.clear();
        }
    });
    for (std::size_t t = 0; t < groups.size(); ++t) {
        auto& r = truck_results[t];
        if (r.estimate) {
            out.trucks.push_back(*r.estimate);
        } else {
            out.errors.push_back({"truck", std::to_string(groups[t].id), r.error});
        }
    }

    // Dumps, correlated: every bucket delivered by an estimated truck.
    std::map<std::string, std::vector<std::size_t>> dump_trucks;
    for (std::size_t t = 0; t < groups.size(); ++t) {
        if (truck_results[t].estimate) dump_trucks[groups[t].dump_id].push_back(t);
    }
    for (const auto& [dump_id, trucks] : dump_trucks) {
        std::vector<BucketSupport> pooled;
        for (std::size_t t : trucks) {
            for (const auto& s : truck_results[t].supports) pooled.push_back(s);
        }
        try {
            out.dumps_correlated.push_back(
                estimate_dump_correlated(dump_id, pooled, trucks.size(), inputs.model, config.kernel, workers));
        } catch (const std::exception& e) {
            out.errors.push_back({"dump", dump_id, error_message(e)});
        }
    }

    // Dumps, independent windows over truck arrivals.
    if (!out.trucks.empty()) {
        double t0 = out.trucks.front().arrival;
        for (const auto& t : out.trucks) t0 = std::min(t0, t.arrival);
        std::map<std::pair<std::string, std::int64_t>, std::vector<const TruckEstimate*>> windows;
        for (const auto& t : out.trucks) {
            const std::int64_t w = config.window_seconds > 0.0
                                       ? static_cast<std::int64_t>(std::floor((t.arrival - t0) / config.window_seconds))
                                       : 0;
            windows[{t.dump_id, w}].push_back(&t);
        }
        for (const auto& [key, trucks] : windows) {
            std::vector<GaussianMoment> moments;
            std::size_t n_buckets = 0;
            for (const auto* t : trucks) {
                moments.push_back(t->matched);
                n_buckets += t->n_buckets;
            }
            DumpEstimate d = estimate_dump_window(key.first, moments, key.second);
            d.n_buckets = n_buckets;
            out.dumps_window.push_back(std::move(d));
        }
    }

    // Plot data.
    if (config.plot_enabled) {
        for (const auto& b : out.buckets) {
            const bool wanted = config.plot_buckets.empty() ||
                                std::find(config.plot_buckets.begin(), config.plot_buckets.end(), b.dig_event_id) !=
                                    config.plot_buckets.end();
            if (wanted) out.plots[b.dig_event_id] = emit_plot_data(b);
        }
    }

    // Summary.
    const auto one = [](const auto&) { return 1.0; };
    const auto by_buckets = [](const auto& e) { return static_cast<double>(e.n_buckets); };
    const StageStats sb = stage_stats(out.buckets, one);
    const StageStats st = stage_stats(out.trucks, by_buckets);
    const StageStats sc = stage_stats(out.dumps_correlated, by_buckets);
    const StageStats sw = stage_stats(out.dumps_window, by_buckets);
    double drift = 0.0;
    for (const auto* s : {&st, &sc, &sw}) {
        if (s->count > 0 && sb.count > 0) drift = std::max(drift, std::abs(s->mean - sb.mean));
    }
    const bool monotone = sb.count > 0 && st.count > 0 && sc.count > 0 && sb.mean_std > st.mean_std &&
                          st.mean_std > sc.mean_std;
    out.summary = {
        {"stages",
         {{"bucket", to_json(sb)}, {"truck", to_json(st)}, {"dump_correlated", to_json(sc)},
          {"dump_window", to_json(sw)}}},
        {"std_decreasing", monotone},
        {"max_mean_drift", drift},
        {"errors", out.errors.size()},
        {"config", to_json(config)},
    };
    out.summary["config"].erase("workers");
    return out;
}

std::string emit_plot_data(const BucketEstimate& estimate, std::size_t points) {
    if (!estimate.components) throw ArgumentError("plot data needs retained mixture components");
    if (points < 2) throw ArgumentError("plot data needs at least 2 points");
    const GaussianMoment& m = estimate.matched;
    const double sd = m.std_dev();
    const double half = sd > 0.0 ? 5.0 * sd : 1e-3 * std::max(1.0, std::abs(m.mean));
    const double lo = m.mean - half;
    const double step = 2.0 * half / static_cast<double>(points - 1);

    std::string s(kPlotHeader);
    s += '\n';
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        double p = 0.0;
        for (const auto& c : estimate.components->components()) {
            if (c.moment.variance > 0.0) p += c.weight * normal_pdf(x, c.moment);
        }
        const double matched = sd > 0.0 ? normal_pdf(x, m) : 0.0;
        s += format_number(x) + ',' + format_number(p) + ',' + format_number(cdf(*estimate.components, x)) + ',' +
             format_number(matched) + '\n';
    }
    return s;
}

std::string buckets_csv(const std::vector<BucketEstimate>& buckets) {
    std::string s(kBucketsHeader);
    s += '\n';
    for (const auto& b : buckets) {
        s += std::to_string(b.dig_event_id) + ',' + format_number(b.matched.mean) + ',' + format_number(b.std) + ',' +
             std::to_string(b.n_components) + '\n';
    }
    return s;
}

std::string trucks_csv(const std::vector<TruckEstimate>& trucks) {
    std::string s(kTrucksHeader);
    s += '\n';
    for (const auto& t : trucks) {
        s += std::to_string(t.truck_id) + ',' + csv_field(t.dump_id) + ',' + std::to_string(t.n_buckets) + ',' +
             std::to_string(t.n_simulations) + ',' + std::to_string(t.n_unestimated) + ',' +
             format_number(t.matched.mean) + ',' + format_number(t.std) + '\n';
    }
    return s;
}

std::string dumps_csv(const std::vector<DumpEstimate>& correlated, const std::vector<DumpEstimate>& window) {
    std::string s(kDumpsHeader);
    s += '\n';
    const auto row = [&](const DumpEstimate& d) {
        const bool win = d.mode == DumpMode::window;
        s += csv_field(d.dump_id) + (win ? ",window," + std::to_string(d.window_index) : std::string(",correlated,")) +
             ',' + std::to_string(d.n_trucks) + ',' + std::to_string(d.n_buckets) + ',' +
             std::to_string(d.n_simulations) + ',' + format_number(d.matched.mean) + ',' + format_number(d.std) + '\n';
    };
    for (const auto& d : correlated) row(d);
    for (const auto& d : window) row(d);
    return s;
}

std::string errors_csv(const std::vector<EntityError>& errors) {
    std::string s(kErrorsHeader);
    s += '\n';
    for (const auto& e : errors) s += e.entity + ',' + csv_field(e.id) + ',' + csv_field(e.message) + '\n';
    return s;
}

void write_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "buckets.csv", buckets_csv(bundle.buckets));
    write_text(out_dir / "trucks.csv", trucks_csv(bundle.trucks));
    write_text(out_dir / "dumps.csv", dumps_csv(bundle.dumps_correlated, bundle.dumps_window));
    write_text(out_dir / "errors.csv", errors_csv(bundle.errors));
    write_text(out_dir / "summary.json", bundle.summary.dump(2) + '\n');
    for (const auto& [id, text] : bundle.plots) {
        write_text(out_dir / "plots" / ("bucket_" + std::to_string(id) + ".csv"), text);
    }
}

}  // namespace gradeprop
