#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gradeprop/bucket_estimator.hpp"
#include "gradeprop/haul_propagation.hpp"
#include "gradeprop/io.hpp"

namespace gradeprop {

struct EntityError {
    std::string entity;  // "bucket", "truck" or "dump"
    std::string id;
    std::string message;
};

struct ReportBundle {
    std::vector<BucketEstimate> buckets;  // by dig id
    std::vector<TruckEstimate> trucks;    // by truck id
    std::vector<DumpEstimate> dumps_correlated;  // by dump id
    std::vector<DumpEstimate> dumps_window;      // by (dump id, window)
    std::vector<EntityError> errors;
    nlohmann::json summary;
    std::map<DigEventId, std::string> plots;  // plot CSV text per bucket
};

// Bucket, truck and dump estimates for a full replay. Entity failures are
// collected in `errors`; only invalid configuration throws.
[[nodiscard]] ReportBundle run_pipeline(const PipelineConfig& config, const Inputs& inputs);

// x, mixture pdf, mixture cdf and matched pdf over matched mean +- 5 std.
[[nodiscard]] std::string emit_plot_data(const BucketEstimate& estimate, std::size_t points = 512);

[[nodiscard]] std::string buckets_csv(const std::vector<BucketEstimate>& buckets);
[[nodiscard]] std::string trucks_csv(const std::vector<TruckEstimate>& trucks);
[[nodiscard]] std::string dumps_csv(const std::vector<DumpEstimate>& correlated, const std::vector<DumpEstimate>& window);
[[nodiscard]] std::string errors_csv(const std::vector<EntityError>& errors);

// buckets.csv, trucks.csv, dumps.csv, errors.csv, summary.json and
// plots/bucket_<id>.csv under `out_dir`.
void write_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir);

}  // namespace gradeprop
