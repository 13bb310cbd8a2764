#include "gradeprop/synth_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gradeprop/errors.hpp"
#include "gradeprop/parallel.hpp"

namespace gradeprop {

void ScenarioSpec::validate() const {
    if ((extent.array() <= 0.0).any() || (block_size.array() <= 0.0).any()) {
        throw ArgumentError("scenario extent and block size must be positive");
    }
    if (bench_id.empty()) throw ArgumentError("scenario bench id is empty");
    if (high_std < 0.0 || low_std < 0.0) throw ArgumentError("scenario stds must be >= 0");
    if (transition_band < 0.0) throw ArgumentError("transition band must be >= 0");
    if (!(along_spacing > 0.0) || !(row_spacing > 0.0) || !(row_length >= 0.0)) {
        throw ArgumentError("dig path spacings must be positive");
    }
    if (dig_z_min > dig_z_max) throw ArgumentError("dig z range is inverted");
    if (buckets_per_truck == 0 || trucks_per_dump == 0) throw ArgumentError("trucks and dumps need members");
    kernel.validate();
}

ScenarioSpec ScenarioSpec::reference() { return ScenarioSpec{}; }

Scenario generate_scenario(const ScenarioSpec& spec) {
    spec.validate();
    Scenario out;

    const auto count = [&](int a) {
        return static_cast<std::int64_t>(std::floor(spec.extent[a] / spec.block_size[a] + 1e-9));
    };
    const std::int64_t nx = count(0), ny = count(1), nz = count(2);
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(nx * ny * nz));
    BlockId next_id = 1;
    for (std::int64_t k = 0; k < nz; ++k) {
        for (std::int64_t j = 0; j < ny; ++j) {
            for (std::int64_t i = 0; i < nx; ++i) {
                Block b;
                b.id = next_id++;
                b.dims = spec.block_size;
                b.centroid = spec.origin + Vec3((i + 0.5) * spec.block_size.x(), (j + 0.5) * spec.block_size.y(),
                                                (k + 0.5) * spec.block_size.z());
                double t = b.centroid.y() < spec.split_y ? 0.0 : 1.0;
                if (spec.transition_band > 0.0) {
                    t = std::clamp((b.centroid.y() - (spec.split_y - 0.5 * spec.transition_band)) /
                                       spec.transition_band,
                                   0.0, 1.0);
                }
                b.mean_grade = (1.0 - t) * spec.high_mean + t * spec.low_mean;
                b.std_grade = (1.0 - t) * spec.high_std + t * spec.low_std;
                b.bench_id = spec.bench_id;
                blocks.push_back(std::move(b));
            }
        }
    }
    out.model = BlockModel(std::move(blocks));

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> jitter(-spec.jitter_xy, spec.jitter_xy);
    std::uniform_real_distribution<double> depth(spec.dig_z_min, spec.dig_z_max);
    const auto per_row = static_cast<std::size_t>(std::floor(spec.row_length / spec.along_spacing + 1e-9)) + 1;
    out.digs.reserve(spec.n_digs);
    for (std::size_t d = 0; d < spec.n_digs; ++d) {
        const std::size_t row = d / per_row;
        std::size_t col = d % per_row;
        if (row % 2 == 1) col = per_row - 1 - col;  // serpentine sweep
        DigEvent e;
        e.id = static_cast<DigEventId>(d + 1);
        const double x = spec.dig_x0 + static_cast<double>(col) * spec.along_spacing + jitter(rng);
        const double y = spec.dig_y0 + static_cast<double>(row) * spec.row_spacing + jitter(rng);
        const double z = spec.origin.z() + depth(rng);
        const auto mm = [](double v) { return std::round(v * 1000.0) / 1000.0; };
        e.position = Vec3(mm(x), mm(y), mm(z));
        e.bench_id = spec.bench_id;
        e.timestamp = spec.start_time + static_cast<double>(d) * spec.seconds_per_bucket;
        out.digs.push_back(std::move(e));
    }

    out.cycles.reserve(spec.n_digs);
    for (std::size_t d = 0; d < spec.n_digs; ++d) {
        const std::size_t truck = d / spec.buckets_per_truck;
        const std::size_t dump = truck / spec.trucks_per_dump;
        HaulCycle c;
        c.dig_event_id = out.digs[d].id;
        c.truck_id = static_cast<TruckId>(truck + 1);
        c.dump_id = (dump + 1 < 10 ? "D0" : "D") + std::to_string(dump + 1);
        c.timestamp = out.digs[d].timestamp;
        out.cycles.push_back(std::move(c));
    }
    return out;
}

Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    Eigen::VectorXd lambda = eig.eigenvalues();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] < -1e-9) throw NumericalError("covariance is not positive semi-definite");
        lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
    }
    return eig.eigenvectors() * lambda.asDiagonal();
}

namespace {

// One simulation slot: the union of blocks, and per bucket the positions of
// its blocks within that union plus their fractions.
struct Draw {
    Eigen::VectorXd mu;
    Eigen::MatrixXd root;
    std::vector<std::vector<std::size_t>> slots;
    std::vector<std::vector<double>> fractions;
};

Draw prepare_draw(std::size_t j, std::span<const BucketSupport> buckets, const BlockModel& model,
                  const CovarianceModel& cov) {
    std::vector<BlockIndex> blocks;
    for (const auto& b : buckets) blocks.insert(blocks.end(), b[j].blocks.begin(), b[j].blocks.end());
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());

    Draw d;
    d.mu.resize(static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t i = 0; i < blocks.size(); ++i) d.mu[static_cast<Eigen::Index>(i)] = model.block(blocks[i]).mean_grade;
    d.root = covariance_sqrt(block_covariance_by_index(model, cov, blocks));
    for (const auto& b : buckets) {
        std::vector<std::size_t> slot;
        for (auto idx : b[j].blocks) {
            slot.push_back(static_cast<std::size_t>(std::lower_bound(blocks.begin(), blocks.end(), idx) - blocks.begin()));
        }
        d.slots.push_back(std::move(slot));
        d.fractions.push_back(b[j].fractions);
    }
    return d;
}

OracleResult run_oracle(std::span<const BucketSupport> buckets, std::span<const double> sim_weights,
                        const BlockModel& model, const CovarianceModel& cov, const OracleConfig& config) {
    if (config.n_samples < 10000) throw ArgumentError("oracle needs at least 10000 samples");
    if (config.partitions == 0) throw ArgumentError("oracle needs at least one partition");
    const std::size_t m = sim_weights.size();

    std::vector<Draw> draws(m);
    parallel_for(m, config.workers, [&](std::size_t j) { draws[j] = prepare_draw(j, buckets, model, cov); });

    const std::size_t parts = config.partitions;
    std::vector<std::vector<double>> values(parts);
    parallel_for(parts, config.workers, [&](std::size_t p) {
        const std::size_t begin = p * config.n_samples / parts;
        const std::size_t end = (p + 1) * config.n_samples / parts;
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(p)};
        std::mt19937_64 rng(seq);
        std::discrete_distribution<std::size_t> pick(sim_weights.begin(), sim_weights.end());
        std::normal_distribution<double> normal;

        std::vector<std::size_t> counts(m, 0);
        for (std::size_t s = begin; s < end; ++s) ++counts[pick(rng)];

        auto& out = values[p];
        out.reserve(end - begin);
        for (std::size_t j = 0; j < m; ++j) {
            if (counts[j] == 0) continue;
            const Draw& d = draws[j];
            const auto u = d.mu.size();
            Eigen::MatrixXd z(u, static_cast<Eigen::Index>(counts[j]));
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                for (Eigen::Index r = 0; r < u; ++r) z(r, c) = normal(rng);
            }
            const Eigen::MatrixXd grades = (d.root * z).colwise() + d.mu;
            for (Eigen::Index c = 0; c < grades.cols(); ++c) {
                double load = 0.0;
                for (std::size_t b = 0; b < d.slots.size(); ++b) {
                    double bucket = 0.0;
                    for (std::size_t i = 0; i < d.slots[b].size(); ++i) {
                        bucket += d.fractions[b][i] * grades(static_cast<Eigen::Index>(d.slots[b][i]), c);
                    }
                    load += bucket;
                }
                out.push_back(load / static_cast<double>(d.slots.size()));
            }
        }
    });

    OracleResult r;
    r.n_samples = config.n_samples;
    double sum = 0.0;
    for (const auto& part : values) {
        for (double v : part) sum += v;
    }
    const double n = static_cast<double>(config.n_samples);
    r.mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (const auto& part : values) {
        for (double v : part) {
            const double d2 = (v - r.mean) * (v - r.mean);
            m2 += d2;
            m4 += d2 * d2;
        }
    }
    const double var = m2 / (n - 1.0);
    r.std = std::sqrt(var);
    r.se_mean = r.std / std::sqrt(n);
    const double central4 = m4 / n;
    const double var_of_var = std::max(central4 - var * var, 0.0) / n;
    r.se_std = r.std > 0.0 ? std::sqrt(var_of_var) / (2.0 * r.std) : 0.0;
    return r;
}

}  // namespace

OracleResult mc_oracle_bucket(const DigEvent& dig, const BucketEstimator& estimator, const OracleConfig& config) {
    const auto located = estimator.supported_locations(dig);
    if (located.empty()) {
        throw EstimationError(dig.id, "dig " + std::to_string(dig.id) + ": no simulated location intersects the model");
    }
    std::vector<double> distances;
    BucketSupport support;
    for (const auto& l : located) {
        distances.push_back(l.location.distance_to_recorded);
        support.push_back(l.support);
    }
    const auto weights = location_weights(distances, estimator.config().weight_mode);
    const BucketSupport* one = &support;
    return run_oracle(std::span(one, 1), weights, estimator.model(), estimator.covariance(), config);
}

OracleResult mc_oracle_truck(std::span<const BucketSupport> buckets, const BlockModel& model,
                             const CovarianceModel& cov, const OracleConfig& config) {
    const std::size_t m = simulation_count(buckets);
    if (m == 0) throw ArgumentError("truck oracle needs buckets with valid locations");
    const std::vector<double> weights(m, 1.0 / static_cast<double>(m));
    return run_oracle(buckets, weights, model, cov, config);
}

}  // namespace gradeprop
