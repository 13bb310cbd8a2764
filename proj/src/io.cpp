#include "gradeprop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gradeprop/errors.hpp"

namespace gradeprop {

namespace fs = std::filesystem;

CsvTable parse_csv(std::string_view text, const std::string& name) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    const auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        const bool blank = record.size() == 1 && record[0].empty() && !field_started;
        if (!blank) {
            if (table.header.empty() && table.rows.empty()) {
                table.header = std::move(record);
            } else {
                table.rows.push_back(std::move(record));
                table.lines.push_back(record_line);
            }
        }
        record.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++line;
                record_line = line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (quoted) throw LoadError(name, line, "unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return table;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), 0, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
    return parse_csv(text, path.string());
}

void expect_header(const CsvTable& table, std::string_view expected, const std::string& name) {
    std::string got;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) got += ',';
        got += table.header[i];
    }
    if (got != expected) {
        throw LoadError(name, 1, "header mismatch: expected '" + std::string(expected) + "', got '" + got + "'");
    }
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    std::string s(buf);
    if (s == "-0") s = "0";
    return s;
}

namespace {

// Seconds with millisecond resolution; 9 significant digits is too coarse for
// epoch timestamps.
std::string format_timestamp(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", t);
    std::string s(buf);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

}  // namespace

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

class RowReader {
public:
    RowReader(const std::string& file, std::size_t line, const std::vector<std::string>& row, std::size_t width)
        : file_(file), line_(line), row_(row) {
        if (row.size() != width) {
            fail("expected " + std::to_string(width) + " fields, got " + std::to_string(row.size()));
        }
    }

    [[noreturn]] void fail(const std::string& what) const { throw LoadError(file_, line_, what); }

    double number(std::size_t col, const char* name) const {
        const std::string& s = row_[col];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
            fail(std::string("invalid number in ") + name + ": '" + s + "'");
        }
        if (!std::isfinite(v)) fail(std::string("non-finite ") + name);
        return v;
    }

    std::int64_t integer(std::size_t col, const char* name) const {
        const std::string& s = row_[col];
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
            fail(std::string("invalid integer in ") + name + ": '" + s + "'");
        }
        return v;
    }

    const std::string& text(std::size_t col, const char* name) const {
        if (row_[col].empty()) fail(std::string("empty ") + name);
        return row_[col];
    }

    bool blank(std::size_t col) const { return row_[col].empty(); }

private:
    const std::string& file_;
    std::size_t line_;
    const std::vector<std::string>& row_;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), 0, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

BlockModel load_blocks(const fs::path& path) {
    const std::string name = path.string();
    const CsvTable table = read_csv(path);
    expect_header(table, kBlocksHeader, name);
    std::vector<Block> blocks;
    blocks.reserve(table.rows.size());
    std::set<BlockId> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        RowReader row(name, table.lines[r], table.rows[r], 10);
        Block b;
        b.id = row.integer(0, "id");
        b.centroid = Vec3(row.number(1, "x"), row.number(2, "y"), row.number(3, "z"));
        b.dims = Vec3(row.number(4, "dx"), row.number(5, "dy"), row.number(6, "dz"));
        b.mean_grade = row.number(7, "mean_fe");
        b.std_grade = row.number(8, "std_fe");
        b.bench_id = row.text(9, "bench");
        if (!seen.insert(b.id).second) row.fail("duplicate block id " + std::to_string(b.id));
        try {
            validate(b);
        } catch (const DataError& e) {
            row.fail(e.what());
        }
        blocks.push_back(std::move(b));
    }
    return BlockModel(std::move(blocks));
}

std::vector<DigEvent> load_digs(const fs::path& path, const BlockModel& model) {
    const std::string name = path.string();
    const CsvTable table = read_csv(path);
    expect_header(table, kDigsHeader, name);
    std::vector<DigEvent> digs;
    digs.reserve(table.rows.size());
    std::set<DigEventId> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        RowReader row(name, table.lines[r], table.rows[r], 6);
        DigEvent d;
        d.id = row.integer(0, "dig_event_id");
        const int blanks = int(row.blank(1)) + int(row.blank(2)) + int(row.blank(3));
        if (blanks == 0) {
            d.position = Vec3(row.number(1, "x"), row.number(2, "y"), row.number(3, "z"));
        } else if (blanks != 3) {
            row.fail("partially missing dig position");
        }
        d.bench_id = row.text(4, "bench");
        if (!model.empty() && !model.has_bench(d.bench_id)) row.fail("unknown bench '" + d.bench_id + "'");
        d.timestamp = row.number(5, "timestamp");
        if (d.timestamp < 0.0) row.fail("negative timestamp");
        if (!seen.insert(d.id).second) row.fail("duplicate dig_event_id " + std::to_string(d.id));
        digs.push_back(std::move(d));
    }
    std::sort(digs.begin(), digs.end(), [](const DigEvent& a, const DigEvent& b) { return a.id < b.id; });
    return digs;
}

std::vector<HaulCycle> load_cycles(const fs::path& path, const std::vector<DigEvent>& digs) {
    const std::string name = path.string();
    const CsvTable table = read_csv(path);
    expect_header(table, kCyclesHeader, name);
    std::set<DigEventId> known;
    for (const auto& d : digs) known.insert(d.id);
    std::set<DigEventId> used;
    std::map<TruckId, std::string> truck_dump;
    std::vector<HaulCycle> cycles;
    cycles.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        RowReader row(name, table.lines[r], table.rows[r], 4);
        HaulCycle c;
        c.dig_event_id = row.integer(0, "dig_event_id");
        c.truck_id = row.integer(1, "truck_id");
        c.dump_id = row.text(2, "dump_id");
        c.timestamp = row.number(3, "timestamp");
        if (c.timestamp < 0.0) row.fail("negative timestamp");
        if (!known.contains(c.dig_event_id)) row.fail("unknown dig_event_id " + std::to_string(c.dig_event_id));
        if (!used.insert(c.dig_event_id).second) {
            row.fail("dig_event_id " + std::to_string(c.dig_event_id) + " appears in more than one cycle");
        }
        auto [it, inserted] = truck_dump.try_emplace(c.truck_id, c.dump_id);
        if (!inserted && it->second != c.dump_id) {
            row.fail("truck " + std::to_string(c.truck_id) + " assigned to dumps '" + it->second + "' and '" +
                     c.dump_id + "'");
        }
        cycles.push_back(std::move(c));
    }
    std::sort(cycles.begin(), cycles.end(), [](const HaulCycle& a, const HaulCycle& b) {
        return std::tie(a.truck_id, a.timestamp, a.dig_event_id) < std::tie(b.truck_id, b.timestamp, b.dig_event_id);
    });
    return cycles;
}

Inputs load_inputs(const fs::path& blocks, const fs::path& digs, const fs::path& cycles) {
    Inputs in;
    try {
        in.model = load_blocks(blocks);
    } catch (const DataError& e) {
        throw LoadError(blocks.string(), 0, e.what());
    }
    in.digs = load_digs(digs, in.model);
    in.cycles = load_cycles(cycles, in.digs);
    return in;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_blocks(const fs::path& path, const BlockModel& model) {
    std::string s(kBlocksHeader);
    s += '\n';
    for (const auto& b : model.blocks()) {
        s += std::to_string(b.id);
        for (double v : {b.centroid.x(), b.centroid.y(), b.centroid.z(), b.dims.x(), b.dims.y(), b.dims.z(),
                         b.mean_grade, b.std_grade}) {
            s += ',';
            s += format_number(v);
        }
        s += ',';
        s += csv_field(b.bench_id);
        s += '\n';
    }
    write_text(path, s);
}

void write_digs(const fs::path& path, const std::vector<DigEvent>& digs) {
    std::string s(kDigsHeader);
    s += '\n';
    for (const auto& d : digs) {
        s += std::to_string(d.id);
        if (d.position) {
            for (int a = 0; a < 3; ++a) s += ',' + format_number((*d.position)[a]);
        } else {
            s += ",,,";
        }
        s += ',' + csv_field(d.bench_id) + ',' + format_timestamp(d.timestamp) + '\n';
    }
    write_text(path, s);
}

void write_cycles(const fs::path& path, const std::vector<HaulCycle>& cycles) {
    std::string s(kCyclesHeader);
    s += '\n';
    for (const auto& c : cycles) {
        s += std::to_string(c.dig_event_id) + ',' + std::to_string(c.truck_id) + ',' + csv_field(c.dump_id) + ',' +
             format_timestamp(c.timestamp) + '\n';
    }
    write_text(path, s);
}

void PipelineConfig::validate() const {
    try {
        estimator.validate();
        kernel.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (!std::isfinite(window_seconds)) throw ConfigError("window_seconds must be finite");
    if (workers < 1) throw ConfigError("workers must be >= 1");
}

namespace {

template <typename T>
T get(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(std::string("unknown config key '") + key + "' in " + where);
        }
    }
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j) {
    reject_unknown(j,
                   {"r_xy_neighbor", "r_xy_sampling", "grid_interval", "bucket_volume", "weight_mode", "kernel",
                    "window_seconds", "plot", "seed", "workers"},
                   "config");
    PipelineConfig c;
    if (j.contains("r_xy_neighbor")) c.estimator.r_xy_neighbor = get<double>(j, "r_xy_neighbor");
    if (j.contains("r_xy_sampling")) c.estimator.r_xy_sampling = get<double>(j, "r_xy_sampling");
    if (j.contains("grid_interval")) c.estimator.grid_interval = get<double>(j, "grid_interval");
    if (j.contains("bucket_volume")) c.estimator.bucket_volume = get<double>(j, "bucket_volume");
    if (j.contains("weight_mode")) {
        const auto mode = get<std::string>(j, "weight_mode");
        if (mode == "equal") {
            c.estimator.weight_mode = WeightMode::equal;
        } else if (mode == "idw2") {
            c.estimator.weight_mode = WeightMode::idw2;
        } else {
            throw ConfigError("weight_mode must be 'equal' or 'idw2'");
        }
    }
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        reject_unknown(k, {"length_scales", "amplitude", "noise", "jitter"}, "kernel");
        if (k.contains("length_scales")) {
            const auto ls = get<std::vector<double>>(k, "length_scales");
            if (ls.size() != 3) throw ConfigError("kernel.length_scales needs 3 values");
            std::copy(ls.begin(), ls.end(), c.kernel.length_scales.begin());
        }
        if (k.contains("amplitude")) c.kernel.amplitude = get<double>(k, "amplitude");
        if (k.contains("noise")) c.kernel.noise = get<double>(k, "noise");
        if (k.contains("jitter")) c.kernel.jitter = get<double>(k, "jitter");
    }
    if (j.contains("window_seconds")) c.window_seconds = get<double>(j, "window_seconds");
    if (j.contains("plot")) {
        const auto& p = j.at("plot");
        reject_unknown(p, {"enabled", "buckets"}, "plot");
        if (p.contains("enabled")) c.plot_enabled = get<bool>(p, "enabled");
        if (p.contains("buckets")) c.plot_buckets = get<std::vector<DigEventId>>(p, "buckets");
    }
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
    if (j.contains("workers")) c.workers = get<int>(j, "workers");
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const LoadError& e) {
        throw ConfigError(e.what());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["r_xy_neighbor"] = c.estimator.r_xy_neighbor;
    j["r_xy_sampling"] = c.estimator.r_xy_sampling;
    j["grid_interval"] = c.estimator.grid_interval;
    j["bucket_volume"] = c.estimator.bucket_volume;
    j["weight_mode"] = c.estimator.weight_mode == WeightMode::equal ? "equal" : "idw2";
    j["kernel"] = {{"length_scales", c.kernel.length_scales},
                   {"amplitude", c.kernel.amplitude},
                   {"noise", c.kernel.noise},
                   {"jitter", c.kernel.jitter}};
    j["window_seconds"] = c.window_seconds;
    j["plot"] = {{"enabled", c.plot_enabled}, {"buckets", c.plot_buckets}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    return j;
}

}  // namespace gradeprop
