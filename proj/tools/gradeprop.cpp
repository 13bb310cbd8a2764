// gradeprop: grade uncertainty propagation from dig events to trucks and dumps.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "gradeprop/errors.hpp"
#include "gradeprop/io.hpp"
#include "gradeprop/pipeline.hpp"
#include "gradeprop/synth_oracle.hpp"

namespace fs = std::filesystem;
using namespace gradeprop;

namespace {

constexpr int kLoadFailure = 1;
constexpr int kConfigFailure = 2;

struct InputPaths {
    fs::path blocks, digs, cycles;
};

struct Overrides {
    std::string config_path;
    std::optional<double> r_xy_neighbor, r_xy_sampling, grid_interval, bucket_volume, window_seconds;
    std::optional<std::string> weight_mode;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
};

void add_inputs(CLI::App* cmd, InputPaths& in) {
    cmd->add_option("--blocks", in.blocks, "Block model CSV")->required();
    cmd->add_option("--digs", in.digs, "Dig events CSV")->required();
    cmd->add_option("--cycles", in.cycles, "Load-haul cycles CSV")->required();
}

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON config; flags below override it");
    cmd->add_option("--r-xy-neighbor", o.r_xy_neighbor, "Block candidate radius in XY (m)");
    cmd->add_option("--r-xy-sampling", o.r_xy_sampling, "Dig location sampling radius in XY (m)");
    cmd->add_option("--grid-interval", o.grid_interval, "Sampling grid spacing (m)");
    cmd->add_option("--bucket-volume", o.bucket_volume, "Bucket volume (m^3)");
    cmd->add_option("--weight-mode", o.weight_mode, "equal or idw2");
    cmd->add_option("--window-seconds", o.window_seconds, "Dump window length; <= 0 for one window");
    cmd->add_option("-j,--workers", o.workers, "Worker threads");
    cmd->add_option("--seed", o.seed, "Seed for Monte-Carlo checks");
}

PipelineConfig resolve(const Overrides& o) {
    nlohmann::json j = o.config_path.empty() ? nlohmann::json::object() : to_json(load_config(o.config_path));
    if (o.r_xy_neighbor) j["r_xy_neighbor"] = *o.r_xy_neighbor;
    if (o.r_xy_sampling) j["r_xy_sampling"] = *o.r_xy_sampling;
    if (o.grid_interval) j["grid_interval"] = *o.grid_interval;
    if (o.bucket_volume) j["bucket_volume"] = *o.bucket_volume;
    if (o.weight_mode) j["weight_mode"] = *o.weight_mode;
    if (o.window_seconds) j["window_seconds"] = *o.window_seconds;
    if (o.workers) j["workers"] = *o.workers;
    if (o.seed) j["seed"] = *o.seed;
    return config_from_json(j);
}

const DigEvent& find_dig(const Inputs& in, DigEventId id) {
    const auto it = std::lower_bound(in.digs.begin(), in.digs.end(), id,
                                     [](const DigEvent& d, DigEventId v) { return d.id < v; });
    if (it == in.digs.end() || it->id != id) throw ArgumentError("unknown dig_event_id " + std::to_string(id));
    return *it;
}

int run_synth(const fs::path& out, std::uint64_t seed, std::optional<std::size_t> n_digs) {
    ScenarioSpec spec = ScenarioSpec::reference();
    spec.seed = seed;
    if (n_digs) spec.n_digs = *n_digs;
    const Scenario s = generate_scenario(spec);
    write_blocks(out / "blocks.csv", s.model);
    write_digs(out / "digs.csv", s.digs);
    write_cycles(out / "cycles.csv", s.cycles);
    std::printf("%zu blocks, %zu digs, %zu cycles -> %s\n", s.model.size(), s.digs.size(), s.cycles.size(),
                out.string().c_str());
    return 0;
}

int run_estimate(const InputPaths& paths, const Overrides& o, const fs::path& out, bool plot,
                 const std::vector<DigEventId>& plot_buckets) {
    PipelineConfig config = resolve(o);
    if (plot) config.plot_enabled = true;
    if (!plot_buckets.empty()) config.plot_buckets = plot_buckets;
    const Inputs in = load_inputs(paths.blocks, paths.digs, paths.cycles);
    const ReportBundle bundle = run_pipeline(config, in);
    write_reports(bundle, out);
    std::printf("%zu buckets, %zu trucks, %zu dumps, %zu errors -> %s\n", bundle.buckets.size(), bundle.trucks.size(),
                bundle.dumps_correlated.size(), bundle.errors.size(), out.string().c_str());
    return 0;
}

int run_oracle(const InputPaths& paths, const Overrides& o, const std::vector<DigEventId>& bucket_ids,
               const std::vector<TruckId>& truck_ids, std::size_t samples) {
    const PipelineConfig config = resolve(o);
    const Inputs in = load_inputs(paths.blocks, paths.digs, paths.cycles);
    BucketEstimator est(in.model, config.kernel, config.estimator);
    OracleConfig oc;
    oc.n_samples = samples;
    oc.seed = config.seed;
    oc.workers = config.workers;

    std::printf("entity,id,mean,std,mc_mean,mc_std,se_mean,se_std\n");
    const auto row = [](const char* entity, std::int64_t id, const GaussianMoment& m, const OracleResult& r) {
        std::printf("%s,%lld,%s,%s,%s,%s,%s,%s\n", entity, static_cast<long long>(id), format_number(m.mean).c_str(),
                    format_number(m.std_dev()).c_str(), format_number(r.mean).c_str(), format_number(r.std).c_str(),
                    format_number(r.se_mean).c_str(), format_number(r.se_std).c_str());
    };
    for (DigEventId id : bucket_ids) {
        const DigEvent& dig = find_dig(in, id);
        row("bucket", id, est.estimate(dig).matched, mc_oracle_bucket(dig, est, oc));
    }
    for (TruckId id : truck_ids) {
        std::vector<BucketSupport> buckets;
        for (const auto& c : in.cycles) {
            if (c.truck_id != id) continue;
            const DigEvent& dig = find_dig(in, c.dig_event_id);
            if (dig.position) buckets.push_back(est.support(dig));
        }
        if (buckets.empty()) throw ArgumentError("truck " + std::to_string(id) + " has no estimable bucket");
        row("truck", id, estimate_truck(id, buckets, in.model, config.kernel, config.workers).matched,
            mc_oracle_truck(buckets, in.model, config.kernel, oc));
    }
    return 0;
}

int run_plot(const InputPaths& paths, const Overrides& o, const std::vector<DigEventId>& bucket_ids,
             const fs::path& out) {
    PipelineConfig config = resolve(o);
    config.estimator.retain_components = true;
    const Inputs in = load_inputs(paths.blocks, paths.digs, paths.cycles);
    BucketEstimator est(in.model, config.kernel, config.estimator);
    for (DigEventId id : bucket_ids) {
        const fs::path file = out / ("bucket_" + std::to_string(id) + ".csv");
        write_text(file, emit_plot_data(est.estimate(find_dig(in, id))));
        std::printf("%s\n", file.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grade uncertainty propagation for open-pit load and haul"};
    app.require_subcommand(1);

    fs::path synth_out;
    std::uint64_t synth_seed = 42;
    std::optional<std::size_t> synth_digs;
    auto* synth = app.add_subcommand("synth", "Write the synthetic two-region reference scenario");
    synth->add_option("-o,--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Scenario seed");
    synth->add_option("--n-digs", synth_digs, "Number of dig events");

    InputPaths est_in;
    Overrides est_o;
    fs::path est_out;
    bool est_plot = false;
    std::vector<DigEventId> est_plot_buckets;
    auto* estimate = app.add_subcommand("estimate", "Estimate buckets, trucks and dumps");
    add_inputs(estimate, est_in);
    add_overrides(estimate, est_o);
    estimate->add_option("-o,--out", est_out, "Report directory")->required();
    estimate->add_flag("--plot", est_plot, "Write per-bucket plot data");
    estimate->add_option("--plot-bucket", est_plot_buckets, "Restrict plot data to these digs");

    InputPaths or_in;
    Overrides or_o;
    std::vector<DigEventId> or_buckets;
    std::vector<TruckId> or_trucks;
    std::size_t or_samples = 100000;
    auto* oracle = app.add_subcommand("oracle", "Compare analytic estimates with Monte-Carlo simulation");
    add_inputs(oracle, or_in);
    add_overrides(oracle, or_o);
    oracle->add_option("--bucket", or_buckets, "Dig event ids");
    oracle->add_option("--truck", or_trucks, "Truck ids");
    oracle->add_option("-n,--samples", or_samples, "Monte-Carlo samples");

    InputPaths pl_in;
    Overrides pl_o;
    std::vector<DigEventId> pl_buckets;
    fs::path pl_out;
    auto* plot = app.add_subcommand("plot", "Write pdf/cdf curves for selected buckets");
    add_inputs(plot, pl_in);
    add_overrides(plot, pl_o);
    plot->add_option("--bucket", pl_buckets, "Dig event ids")->required();
    plot->add_option("-o,--out", pl_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigFailure;
    }

    try {
        if (*synth) return run_synth(synth_out, synth_seed, synth_digs);
        if (*estimate) return run_estimate(est_in, est_o, est_out, est_plot, est_plot_buckets);
        if (*oracle) return run_oracle(or_in, or_o, or_buckets, or_trucks, or_samples);
        if (*plot) return run_plot(pl_in, pl_o, pl_buckets, pl_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const LoadError& e) {
        std::cerr << "load error: " << e.what() << '\n';
        return kLoadFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kLoadFailure;
    }
    return 0;
}
