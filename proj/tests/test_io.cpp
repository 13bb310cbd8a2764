#include <functional>

#include "doctest.h"
#include "oracles.hpp"

#include "gradeprop/errors.hpp"
#include "gradeprop/io.hpp"
#include "gradeprop/pipeline.hpp"
#include "gradeprop/synth_oracle.hpp"

using namespace gradeprop;
namespace fs = std::filesystem;

namespace {

ScenarioSpec small_spec() {
    ScenarioSpec s;
    s.extent = Vec3(60.0, 60.0, 10.0);
    s.split_y = 30.0;
    s.dig_x0 = 15.0;
    s.dig_y0 = 20.0;
    s.row_length = 30.0;
    s.n_digs = 120;
    s.buckets_per_truck = 8;
    s.trucks_per_dump = 5;
    return s;
}

fs::path write_scenario(const Scenario& sc, const std::string& name) {
    const auto dir = oracle::scratch_dir(name);
    write_blocks(dir / "blocks.csv", sc.model);
    write_digs(dir / "digs.csv", sc.digs);
    write_cycles(dir / "cycles.csv", sc.cycles);
    return dir;
}

std::string load_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const LoadError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("csv parsing handles quotes and line endings") {
        const auto t = parse_csv("a,b,c\r\n1,\"x,y\",\"he said \"\"hi\"\"\"\n\n2,,z\n", "mem");
        CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
        REQUIRE(t.rows.size() == 2);
        CHECK(t.rows[0] == std::vector<std::string>{"1", "x,y", "he said \"hi\""});
        CHECK(t.rows[1] == std::vector<std::string>{"2", "", "z"});
        CHECK(t.lines == std::vector<std::size_t>{2, 4});
        CHECK_THROWS_AS((void)parse_csv("a\n\"open\n", "mem"), LoadError);
    }

    TEST_CASE("number formatting") {
        CHECK(format_number(62.0) == "62");
        CHECK(format_number(0.1234567891234) == "0.123456789");
        CHECK(format_number(-0.0) == "0");
        CHECK(format_number(1.5e-12) == "1.5e-12");
        CHECK(csv_field("a,b") == "\"a,b\"");
        CHECK(csv_field("plain") == "plain");
    }

    TEST_CASE("three-row block file") {
        const auto dir = oracle::scratch_dir("three_rows");
        write_text(dir / "blocks.csv",
                   "id,x,y,z,dx,dy,dz,mean_fe,std_fe,bench\n"
                   "1,1,1,1,2,2,2,60,1,A\n"
                   "2,3,1,1,2,2,2,55.5,0.5,A\n"
                   "3,5,1,1,2,2,2,45,2,A\n");
        const auto m = load_blocks(dir / "blocks.csv");
        REQUIRE(m.size() == 3);
        CHECK(m.block(1).mean_grade == 55.5);
        CHECK(m.bench_ids() == std::vector<std::string>{"A"});
    }

    TEST_CASE("header-only files give empty collections") {
        const auto dir = oracle::scratch_dir("header_only");
        write_text(dir / "blocks.csv", std::string(kBlocksHeader) + "\n");
        write_text(dir / "digs.csv", std::string(kDigsHeader) + "\n");
        write_text(dir / "cycles.csv", std::string(kCyclesHeader) + "\n");
        const auto in = load_inputs(dir / "blocks.csv", dir / "digs.csv", dir / "cycles.csv");
        CHECK(in.model.empty());
        CHECK(in.digs.empty());
        CHECK(in.cycles.empty());
    }

    TEST_CASE("cycle with an unknown dig names the id") {
        const auto dir = oracle::scratch_dir("unknown_dig");
        write_text(dir / "blocks.csv", std::string(kBlocksHeader) + "\n1,1,1,1,2,2,2,60,1,A\n");
        write_text(dir / "digs.csv", std::string(kDigsHeader) + "\n5,1,1,1,A,100\n");
        write_text(dir / "cycles.csv", std::string(kCyclesHeader) + "\n5,1,D1,100\n424242,1,D1,140\n");
        const auto msg = load_error([&] { (void)load_inputs(dir / "blocks.csv", dir / "digs.csv", dir / "cycles.csv"); });
        CHECK(msg.find("424242") != std::string::npos);
        CHECK(msg.find(":3:") != std::string::npos);
    }

    TEST_CASE("row errors report file and line") {
        const auto dir = oracle::scratch_dir("row_errors");
        const std::string blocks_ok = std::string(kBlocksHeader) + "\n1,1,1,1,2,2,2,60,1,A\n";
        write_text(dir / "blocks.csv", blocks_ok);
        const auto m = load_blocks(dir / "blocks.csv");

        const auto try_blocks = [&](const std::string& body) {
            write_text(dir / "b.csv", std::string(kBlocksHeader) + "\n" + body);
            return load_error([&] { (void)load_blocks(dir / "b.csv"); });
        };
        CHECK(try_blocks("1,1,1,1,2,2,2,60,1,A\n2,1,1,nan,2,2,2,60,1,A\n").find(":3:") != std::string::npos);
        CHECK(try_blocks("1,1,1,1,2,2,2,60,1,A\n1,3,1,1,2,2,2,60,1,A\n").find("duplicate") != std::string::npos);
        CHECK(try_blocks("1,1,1,1,2,2,2,60,1\n").find(":2:") != std::string::npos);
        CHECK(try_blocks("1,1,1,1,0,2,2,60,1,A\n").find(":2:") != std::string::npos);
        CHECK(try_blocks("x,1,1,1,2,2,2,60,1,A\n").find("id") != std::string::npos);

        write_text(dir / "bad_header.csv", "id,x,y\n");
        CHECK(load_error([&] { (void)load_blocks(dir / "bad_header.csv"); }).find("header") != std::string::npos);
        CHECK(load_error([&] { (void)load_blocks(dir / "missing.csv"); }).find("cannot open") != std::string::npos);

        const auto try_digs = [&](const std::string& body) {
            write_text(dir / "d.csv", std::string(kDigsHeader) + "\n" + body);
            return load_error([&] { (void)load_digs(dir / "d.csv", m); });
        };
        CHECK(try_digs("1,1,1,1,Z,0\n").find("bench") != std::string::npos);
        CHECK(try_digs("1,1,,1,A,0\n").find("partially") != std::string::npos);
        CHECK(try_digs("1,1,1,1,A,-5\n").find("negative") != std::string::npos);
        CHECK(try_digs("1,1,1,1,A,0\n1,2,2,2,A,0\n").find("duplicate") != std::string::npos);

        write_text(dir / "d.csv", std::string(kDigsHeader) + "\n1,1,1,1,A,0\n2,1,1,1,A,0\n");
        const auto digs = load_digs(dir / "d.csv", m);
        const auto try_cycles = [&](const std::string& body) {
            write_text(dir / "c.csv", std::string(kCyclesHeader) + "\n" + body);
            return load_error([&] { (void)load_cycles(dir / "c.csv", digs); });
        };
        CHECK(try_cycles("1,1,D1,0\n2,1,D2,0\n").find("dumps") != std::string::npos);
        CHECK(try_cycles("1,1,D1,0\n1,2,D1,0\n").find("more than one") != std::string::npos);
    }

    TEST_CASE("dropout rows have no position") {
        const auto dir = oracle::scratch_dir("dropout");
        write_text(dir / "blocks.csv", std::string(kBlocksHeader) + "\n1,1,1,1,2,2,2,60,1,A\n");
        write_text(dir / "digs.csv", std::string(kDigsHeader) + "\n2,,,,A,10\n1,1,1,1,A,5\n");
        const auto m = load_blocks(dir / "blocks.csv");
        const auto digs = load_digs(dir / "digs.csv", m);
        REQUIRE(digs.size() == 2);
        CHECK(digs[0].id == 1);
        CHECK(digs[0].position.has_value());
        CHECK(!digs[1].position.has_value());
    }

    TEST_CASE("scenario round trip through csv") {
        const auto sc = generate_scenario(small_spec());
        const auto dir = write_scenario(sc, "round_trip");
        const auto in = load_inputs(dir / "blocks.csv", dir / "digs.csv", dir / "cycles.csv");
        REQUIRE(in.model.size() == sc.model.size());
        for (std::size_t i = 0; i < sc.model.size(); ++i) {
            const auto& a = sc.model.blocks()[i];
            const auto& b = in.model.blocks()[i];
            CHECK(a.id == b.id);
            CHECK(a.centroid == b.centroid);
            CHECK(a.dims == b.dims);
            CHECK(a.mean_grade == b.mean_grade);
            CHECK(a.std_grade == b.std_grade);
            CHECK(a.bench_id == b.bench_id);
        }
        REQUIRE(in.digs.size() == sc.digs.size());
        for (std::size_t i = 0; i < sc.digs.size(); ++i) {
            CHECK(in.digs[i].id == sc.digs[i].id);
            CHECK(*in.digs[i].position == *sc.digs[i].position);
            CHECK(in.digs[i].bench_id == sc.digs[i].bench_id);
            CHECK(in.digs[i].timestamp == sc.digs[i].timestamp);
        }
        REQUIRE(in.cycles.size() == sc.cycles.size());
        for (std::size_t i = 0; i < sc.cycles.size(); ++i) {
            CHECK(in.cycles[i].dig_event_id == sc.cycles[i].dig_event_id);
            CHECK(in.cycles[i].truck_id == sc.cycles[i].truck_id);
            CHECK(in.cycles[i].dump_id == sc.cycles[i].dump_id);
            CHECK(in.cycles[i].timestamp == sc.cycles[i].timestamp);
        }
    }

    TEST_CASE("config json") {
        const auto c = config_from_json(nlohmann::json::parse(R"({
            "r_xy_neighbor": 9, "r_xy_sampling": 10.5, "grid_interval": 1.5, "bucket_volume": 25,
            "weight_mode": "idw2", "kernel": {"length_scales": [10, 12, 4], "amplitude": 2, "noise": 0.1},
            "window_seconds": 3600, "plot": {"enabled": true, "buckets": [3, 4]}, "seed": 7, "workers": 3})"));
        CHECK(c.estimator.r_xy_neighbor == 9.0);
        CHECK(c.estimator.r_xy_sampling == 10.5);
        CHECK(c.estimator.grid_interval == 1.5);
        CHECK(c.estimator.bucket_volume == 25.0);
        CHECK(c.estimator.weight_mode == WeightMode::idw2);
        CHECK(c.kernel.length_scales == std::array<double, 3>{10, 12, 4});
        CHECK(c.kernel.amplitude == 2.0);
        CHECK(c.kernel.jitter == 1e-8);
        CHECK(c.window_seconds == 3600.0);
        CHECK(c.plot_enabled);
        CHECK(c.plot_buckets == std::vector<DigEventId>{3, 4});
        CHECK(c.seed == 7);
        CHECK(c.workers == 3);

        const auto back = config_from_json(to_json(c));
        CHECK(to_json(back) == to_json(c));

        const auto defaults = config_from_json(nlohmann::json::object());
        CHECK(defaults.estimator.r_xy_neighbor == 12.0);
        CHECK(defaults.estimator.bucket_volume == 30.0);
        CHECK(defaults.estimator.weight_mode == WeightMode::equal);

        for (const char* bad : {R"({"radius": 3})", R"({"grid_interval": "two"})", R"({"grid_interval": 0})",
                                R"({"weight_mode": "cubic"})", R"({"kernel": {"length_scales": [1, 2]}})",
                                R"({"kernel": {"amplitude": -1}})", R"({"plot": {"colour": 1}})",
                                R"({"workers": 0})", R"([1, 2])"}) {
            CHECK_THROWS_AS((void)config_from_json(nlohmann::json::parse(bad)), ConfigError);
        }
        const auto dir = oracle::scratch_dir("config");
        write_text(dir / "broken.json", "{not json");
        CHECK_THROWS_AS((void)load_config(dir / "broken.json"), ConfigError);
        CHECK_THROWS_AS((void)load_config(dir / "absent.json"), ConfigError);
    }
}

TEST_SUITE("pipeline") {
    TEST_CASE("reports cover every entity and parse under their schemas") {
        auto sc = generate_scenario(small_spec());
        sc.digs[5].position.reset();
        sc.digs[6].position = Vec3(500, 500, 5);
        const auto dir = write_scenario(sc, "pipeline");
        const auto in = load_inputs(dir / "blocks.csv", dir / "digs.csv", dir / "cycles.csv");
        PipelineConfig cfg;
        cfg.window_seconds = 1200.0;
        cfg.plot_enabled = true;
        cfg.plot_buckets = {1, 2, 40};
        const auto bundle = run_pipeline(cfg, in);
        write_reports(bundle, dir / "out");

        // Dig 6 (missing position) and 7 (off the model) fail; truck 1 holds both.
        CHECK(bundle.buckets.size() == 118);
        CHECK(bundle.trucks.size() == 14);
        CHECK(bundle.dumps_correlated.size() == 3);
        REQUIRE(bundle.errors.size() == 3);
        CHECK(bundle.errors[0].entity == "bucket");
        CHECK(bundle.errors[0].id == "6");
        CHECK(bundle.errors[1].id == "7");
        CHECK(bundle.errors[2].entity == "truck");
        CHECK(bundle.errors[2].id == "1");

        const auto buckets = read_csv(dir / "out" / "buckets.csv");
        expect_header(buckets, kBucketsHeader, "buckets");
        CHECK(buckets.rows.size() == bundle.buckets.size());
        const auto trucks = read_csv(dir / "out" / "trucks.csv");
        expect_header(trucks, kTrucksHeader, "trucks");
        CHECK(trucks.rows.size() == bundle.trucks.size());
        const auto dumps = read_csv(dir / "out" / "dumps.csv");
        expect_header(dumps, kDumpsHeader, "dumps");
        CHECK(dumps.rows.size() == bundle.dumps_correlated.size() + bundle.dumps_window.size());
        const auto errors = read_csv(dir / "out" / "errors.csv");
        expect_header(errors, kErrorsHeader, "errors");
        CHECK(errors.rows.size() == 3);
        for (const auto* t : {&buckets, &trucks, &dumps, &errors}) {
            for (const auto& row : t->rows) CHECK(row.size() == t->header.size());
        }
        for (const auto& row : buckets.rows) {
            CHECK(std::strtod(row[2].c_str(), nullptr) >= 0.0);
            CHECK(std::stoll(row[3]) > 0);
        }
        for (const auto& row : dumps.rows) CHECK((row[1] == "correlated" || row[1] == "window"));

        const auto summary = nlohmann::json::parse(oracle::slurp(dir / "out" / "summary.json"));
        CHECK(summary["stages"]["bucket"]["count"] == 118);
        CHECK(summary["stages"]["truck"]["count"] == 14);
        CHECK(summary["errors"] == 3);

        for (DigEventId id : {1, 2, 40}) {
            const auto plot = read_csv(dir / "out" / "plots" / ("bucket_" + std::to_string(id) + ".csv"));
            expect_header(plot, kPlotHeader, "plot");
            CHECK(plot.rows.size() == 512);
        }
        CHECK(!fs::exists(dir / "out" / "plots" / "bucket_3.csv"));
    }

    TEST_CASE("truck with a dropout bucket counts it as unestimated") {
        auto sc = generate_scenario(small_spec());
        sc.digs[20].position.reset();
        PipelineConfig cfg;
        const Inputs in{sc.model, sc.digs, sc.cycles};
        const auto bundle = run_pipeline(cfg, in);
        const auto& t3 = bundle.trucks[2];
        CHECK(t3.truck_id == 3);
        CHECK(t3.n_unestimated == 1);
        CHECK(t3.n_buckets == 7);
        REQUIRE(bundle.errors.size() == 1);
        CHECK(bundle.errors[0].entity == "bucket");
    }

    TEST_CASE("window assignment") {
        const auto sc = generate_scenario(small_spec());
        const Inputs in{sc.model, sc.digs, sc.cycles};
        PipelineConfig cfg;
        const auto one = run_pipeline(cfg, in);
        CHECK(one.dumps_window.size() == one.dumps_correlated.size());
        for (const auto& d : one.dumps_window) CHECK(d.window_index == 0);
        cfg.window_seconds = 8 * 40.0;
        const auto per_truck = run_pipeline(cfg, in);
        CHECK(per_truck.dumps_window.size() == per_truck.trucks.size());
        for (std::size_t i = 0; i < per_truck.trucks.size(); ++i) {
            CHECK(per_truck.dumps_window[i].matched == per_truck.trucks[i].matched);
        }
    }

    TEST_CASE("plot data") {
        const auto sc = generate_scenario(small_spec());
        EstimatorConfig ec;
        ec.retain_components = true;
        const BucketEstimator est(sc.model, CovarianceModel{}, ec);
        const auto boundary = est.estimate(sc.digs[70]);
        const auto text = emit_plot_data(boundary);
        const auto t = parse_csv(text, "plot");
        expect_header(t, kPlotHeader, "plot");
        REQUIRE(t.rows.size() == 512);
        CHECK(std::strtod(t.rows.front()[0].c_str(), nullptr) == doctest::Approx(boundary.matched.mean - 5 * boundary.std).epsilon(1e-8));
        CHECK(std::strtod(t.rows.back()[0].c_str(), nullptr) == doctest::Approx(boundary.matched.mean + 5 * boundary.std).epsilon(1e-8));
        double previous = 0.0;
        for (const auto& row : t.rows) {
            CHECK(std::strtod(row[1].c_str(), nullptr) >= 0.0);
            CHECK(std::strtod(row[2].c_str(), nullptr) >= previous);
            previous = std::strtod(row[2].c_str(), nullptr);
        }
        CHECK(previous > 0.999);

        BucketEstimate single;
        single.matched = {50.0, 4.0};
        single.std = 2.0;
        const std::vector<GaussianMoment> one{single.matched};
        single.components = GaussianMixture::equal_weights(one);
        const auto s = parse_csv(emit_plot_data(single), "plot");
        for (const auto& row : s.rows) CHECK(row[1] == row[3]);

        BucketEstimate bare;
        CHECK_THROWS_AS((void)emit_plot_data(bare), ArgumentError);
    }
}
