#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "gradeprop/block_model.hpp"
#include "gradeprop/errors.hpp"

using namespace gradeprop;
using oracle::make_block;

namespace {

std::vector<Block> random_blocks(std::mt19937_64& rng, std::size_t n, int benches) {
    std::uniform_real_distribution<double> xy(0.0, 100.0), size(0.5, 4.0), grade(30.0, 65.0), sd(0.1, 3.0);
    std::uniform_int_distribution<int> bench(0, benches - 1);
    std::vector<Block> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int b = bench(rng);
        const double dz = size(rng);
        std::uniform_real_distribution<double> z(10.0 * b + dz / 2, 10.0 * b + 10.0 - dz / 2);
        out.push_back(make_block(static_cast<BlockId>(7 * i + 3), Vec3(xy(rng), xy(rng), z(rng)),
                                 Vec3(size(rng), size(rng), dz), grade(rng), sd(rng), "B" + std::to_string(b)));
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

}  // namespace

TEST_SUITE("block_model") {
    TEST_CASE("stacked column is returned whole") {
        std::vector<Block> blocks;
        for (int k = 0; k < 3; ++k) blocks.push_back(make_block(k + 1, Vec3(5, 5, 1 + 2 * k), Vec3(2, 2, 2), 50, 1));
        blocks.push_back(make_block(9, Vec3(9, 5, 3), Vec3(2, 2, 2), 50, 1));
        const BlockModel m(blocks);
        CHECK(m.radius_neighbors(Vec3(5, 5, 3), 1.0) == std::vector<BlockId>{1, 2, 3});
    }

    TEST_CASE("block at twice the radius is excluded") {
        const BlockModel m({make_block(1, Vec3(4, 0, 1), Vec3(2, 2, 2), 50, 1)});
        CHECK(m.radius_neighbors(Vec3(0, 0, 1), 2.0).empty());
    }

    TEST_CASE("non-positive radius is rejected") {
        const BlockModel m({make_block(1, Vec3(0, 0, 1), Vec3(2, 2, 2), 50, 1)});
        CHECK_THROWS_AS((void)m.radius_neighbors(Vec3(0, 0, 1), 0.0), ArgumentError);
        CHECK_THROWS_AS((void)m.radius_neighbors(Vec3(0, 0, 1), -1.0), ArgumentError);
    }

    TEST_CASE("1000 random blocks agree with a linear scan at r = 12") {
        std::mt19937_64 rng(11);
        const auto blocks = random_blocks(rng, 1000, 1);
        const BlockModel m(blocks);
        std::uniform_real_distribution<double> q(-10.0, 110.0);
        for (int t = 0; t < 100; ++t) {
            const Vec3 p(q(rng), q(rng), 5.0);
            CHECK(m.radius_neighbors(p, 12.0) == oracle::linear_scan(blocks, p, 12.0, "B0"));
        }
    }

    TEST_CASE("property: radius query equals linear scan on 200 random models") {
        std::mt19937_64 rng(12);
        std::uniform_int_distribution<std::size_t> count(1, 400);
        std::uniform_real_distribution<double> q(-20.0, 120.0), r(0.1, 40.0);
        for (int model = 0; model < 200; ++model) {
            const int benches = 1 + model % 3;
            const auto blocks = random_blocks(rng, count(rng), benches);
            const BlockModel m(blocks);
            for (int t = 0; t < 10; ++t) {
                const Vec3 p(q(rng), q(rng), 0.0);
                const double radius = r(rng);
                for (const auto& bench : m.bench_ids()) {
                    REQUIRE(m.radius_neighbors(p, radius, bench) == oracle::linear_scan(blocks, p, radius, bench));
                }
            }
        }
    }

    TEST_CASE("z only selects the bench") {
        const BlockModel m({make_block(1, Vec3(0, 0, 5), Vec3(2, 2, 10), 50, 1, "L1"),
                            make_block(2, Vec3(0, 0, 15), Vec3(2, 2, 10), 50, 1, "L2")});
        CHECK(m.radius_neighbors(Vec3(0, 0, 2), 3.0) == std::vector<BlockId>{1});
        CHECK(m.radius_neighbors(Vec3(0, 0, 12), 3.0) == std::vector<BlockId>{2});
        CHECK(m.radius_neighbors(Vec3(0, 0, 20), 3.0) == std::vector<BlockId>{2});
        CHECK(m.radius_neighbors(Vec3(0, 0, 12), 3.0, "L1") == std::vector<BlockId>{1});
        CHECK(m.bench_extent("L2").z_min == 10.0);
        CHECK(m.bench_extent("L2").z_max == 20.0);
    }

    TEST_CASE("invalid blocks are rejected") {
        CHECK_THROWS_AS(BlockModel({make_block(1, Vec3(0, 0, 0), Vec3(0, 2, 2), 50, 1)}), DataError);
        CHECK_THROWS_AS(BlockModel({make_block(1, Vec3(0, 0, 0), Vec3(2, 2, 2), 50, -1)}), DataError);
        CHECK_THROWS_AS(BlockModel({make_block(1, Vec3(0, 0, 0), Vec3(2, 2, 2), 101, 1)}), DataError);
        CHECK_THROWS_AS(BlockModel({make_block(1, Vec3(0, 0, 0), Vec3(2, 2, 2), 50, 1),
                                    make_block(1, Vec3(4, 0, 0), Vec3(2, 2, 2), 50, 1)}),
                        DataError);
        CHECK_THROWS_AS(BlockModel({make_block(1, Vec3(NAN, 0, 0), Vec3(2, 2, 2), 50, 1)}), DataError);
    }

    TEST_CASE("single block with std 2 gives [[4]]") {
        const BlockModel m({make_block(5, Vec3(0, 0, 0), Vec3(2, 2, 2), 50, 2.0)});
        CovarianceModel cov;
        cov.jitter = 0.0;
        const std::vector<BlockId> ids{5};
        const auto s = block_covariance(m, cov, ids);
        REQUIRE(s.rows() == 1);
        CHECK(s(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
    }

    TEST_CASE("distant blocks are uncorrelated") {
        const BlockModel m({make_block(1, Vec3(0, 0, 0), Vec3(2, 2, 2), 50, 1.5),
                            make_block(2, Vec3(500, 0, 0), Vec3(2, 2, 2), 50, 2.5)});
        const std::vector<BlockId> ids{1, 2};
        const auto s = block_covariance(m, CovarianceModel{}, ids);
        CHECK(std::abs(s(0, 1)) < 1e-8 * 1.5 * 2.5);
    }

    TEST_CASE("separation of one length scale gives exp(-1/2)") {
        CovarianceModel cov;
        cov.jitter = 0.0;
        const BlockModel m({make_block(1, Vec3(0, 0, 0), Vec3(2, 2, 2), 50, 1),
                            make_block(2, Vec3(cov.length_scales[0], 0, 0), Vec3(2, 2, 2), 50, 1)});
        const std::vector<BlockId> ids{1, 2};
        const auto s = block_covariance(m, cov, ids);
        CHECK(s(0, 1) == doctest::Approx(0.6065306597).epsilon(1e-9));
        CHECK(s(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    }

    TEST_CASE("covariance matches the term-by-term oracle, is PSD and permutation equivariant") {
        std::mt19937_64 rng(13);
        const auto blocks = random_blocks(rng, 300, 1);
        const BlockModel m(blocks);
        CovarianceModel cov;
        cov.amplitude = 1.7;
        cov.noise = 0.05;
        std::uniform_int_distribution<std::size_t> size(1, 60);
        for (int t = 0; t < 50; ++t) {
            std::vector<Block> pick = blocks;
            std::shuffle(pick.begin(), pick.end(), rng);
            pick.resize(size(rng));
            std::vector<BlockId> ids;
            for (const auto& b : pick) ids.push_back(b.id);

            const auto s = block_covariance(m, cov, ids);
            const auto ref = oracle::dense_sigma(pick, cov.length_scales, cov.amplitude, cov.noise + cov.jitter);
            CHECK((s - ref).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-9);

            std::vector<std::size_t> perm(ids.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<BlockId> permuted;
            for (auto p : perm) permuted.push_back(ids[p]);
            const auto sp = block_covariance(m, cov, permuted);
            for (std::size_t i = 0; i < perm.size(); ++i) {
                for (std::size_t j = 0; j < perm.size(); ++j) {
                    REQUIRE(sp(i, j) == s(perm[i], perm[j]));
                }
            }
        }
    }

    TEST_CASE("quadratic form routes agree with the dense product") {
        std::vector<Block> blocks;
        BlockId id = 1;
        for (int k = 0; k < 5; ++k) {
            for (int j = 0; j < 20; ++j) {
                for (int i = 0; i < 20; ++i) {
                    blocks.push_back(make_block(id++, Vec3(1 + 2 * i, 1 + 2 * j, 1 + 2 * k), Vec3(2, 2, 2),
                                                40 + i, 0.5 + 0.1 * ((i + j + k) % 7)));
                }
            }
        }
        const BlockModel m(blocks);
        CovarianceModel cov;
        cov.noise = 0.2;
        std::mt19937_64 rng(14);
        std::uniform_real_distribution<double> w(0.0, 1.0);
        for (std::size_t n : {1u, 5u, 40u, 300u, 2000u}) {
            std::vector<BlockIndex> idx(m.size());
            std::iota(idx.begin(), idx.end(), 0u);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(n);
            std::sort(idx.begin(), idx.end());
            std::vector<double> weights(n);
            for (auto& x : weights) x = w(rng);

            std::vector<Block> sel;
            for (auto i : idx) sel.push_back(blocks[i]);
            const auto sigma = oracle::dense_sigma(sel, cov.length_scales, cov.amplitude, cov.noise + cov.jitter);
            const Eigen::Map<const Eigen::VectorXd> v(weights.data(), static_cast<Eigen::Index>(n));
            const double ref = v.dot(sigma * v);

            const double pair = quadratic_form(m, cov, idx, weights, QuadraticRoute::pairwise);
            const double sep = quadratic_form(m, cov, idx, weights, QuadraticRoute::separable);
            const double autom = quadratic_form(m, cov, idx, weights);
            CHECK(pair == doctest::Approx(ref).epsilon(1e-10));
            CHECK(sep == doctest::Approx(ref).epsilon(1e-10));
            CHECK(autom == doctest::Approx(ref).epsilon(1e-10));
        }
    }

    TEST_CASE("kernel parameters are validated") {
        CovarianceModel cov;
        cov.length_scales[1] = 0.0;
        CHECK_THROWS_AS(cov.validate(), ArgumentError);
        cov = CovarianceModel{};
        cov.amplitude = 0.0;
        CHECK_THROWS_AS(cov.validate(), ArgumentError);
        cov = CovarianceModel{};
        cov.jitter = -1e-9;
        CHECK_THROWS_AS(cov.validate(), ArgumentError);
    }
}
