#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gradeprop/block_model.hpp"
#include "gradeprop/bucket_estimator.hpp"
#include "gradeprop/records.hpp"

namespace gradeprop {

// Fixed input schemas (header line must match exactly).
inline constexpr std::string_view kBlocksHeader = "id,x,y,z,dx,dy,dz,mean_fe,std_fe,bench";
inline constexpr std::string_view kDigsHeader = "dig_event_id,x,y,z,bench,timestamp";
inline constexpr std::string_view kCyclesHeader = "dig_event_id,truck_id,dump_id,timestamp";

// Output schemas.
inline constexpr std::string_view kBucketsHeader = "dig_event_id,mean,std,n_components";
inline constexpr std::string_view kTrucksHeader = "truck_id,dump_id,n_buckets,n_simulations,n_unestimated,mean,std";
inline constexpr std::string_view kDumpsHeader = "dump_id,mode,window_index,n_trucks,n_buckets,n_simulations,mean,std";
inline constexpr std::string_view kErrorsHeader = "entity,id,message";
inline constexpr std::string_view kPlotHeader = "x,pdf,cdf,matched_pdf";

// Minimal RFC 4180 table: header plus rows, fields may be double-quoted.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row
};

[[nodiscard]] CsvTable parse_csv(std::string_view text, const std::string& name);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);
// Throws LoadError unless the header equals `expected`.
void expect_header(const CsvTable& table, std::string_view expected, const std::string& name);

// "%.9g", with "-0" normalized to "0".
[[nodiscard]] std::string format_number(double v);
[[nodiscard]] std::string csv_field(std::string_view s);

struct Inputs {
    BlockModel model;
    std::vector<DigEvent> digs;      // sorted by id
    std::vector<HaulCycle> cycles;   // sorted by (truck_id, timestamp, dig_event_id)
};

[[nodiscard]] BlockModel load_blocks(const std::filesystem::path& path);
// Empty x,y,z fields mark a sensor dropout. Bench must exist in `model`.
[[nodiscard]] std::vector<DigEvent> load_digs(const std::filesystem::path& path, const BlockModel& model);
[[nodiscard]] std::vector<HaulCycle> load_cycles(const std::filesystem::path& path, const std::vector<DigEvent>& digs);
[[nodiscard]] Inputs load_inputs(const std::filesystem::path& blocks, const std::filesystem::path& digs,
                                 const std::filesystem::path& cycles);

void write_blocks(const std::filesystem::path& path, const BlockModel& model);
void write_digs(const std::filesystem::path& path, const std::vector<DigEvent>& digs);
void write_cycles(const std::filesystem::path& path, const std::vector<HaulCycle>& cycles);
void write_text(const std::filesystem::path& path, const std::string& text);

struct PipelineConfig {
    EstimatorConfig estimator;
    CovarianceModel kernel;
    double window_seconds = 0.0;  // <= 0: one window over the whole replay
    bool plot_enabled = false;
    std::vector<DigEventId> plot_buckets;
    std::uint64_t seed = 1;
    int workers = 1;

    // Throws ConfigError.
    void validate() const;
};

// Unknown keys and wrong types throw ConfigError. Missing keys keep defaults.
[[nodiscard]] PipelineConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] PipelineConfig load_config(const std::filesystem::path& path);
[[nodiscard]] nlohmann::json to_json(const PipelineConfig& config);

}  // namespace gradeprop
