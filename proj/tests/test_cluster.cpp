// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <sstream>

#include "curato/cluster.hpp"
#include "dbscan_oracle.hpp"
#include "test_util.hpp"

using namespace curato;
using namespace curato::cluster;
using Catch::Matchers::WithinAbs;

namespace {

Matrix<double> random_points(std::size_t n, std::uint64_t seed, double spread = 10.0) {
    Rng rng(seed);
    Matrix<double> p(n, 2);
    // A few dense blobs plus uniform background, so core/border/noise all occur.
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform() < 0.7) {
            const double cx = static_cast<double>(rng.below(4)) * spread / 3.0, cy = static_cast<double>(rng.below(3)) * spread / 2.0;
            p(i, 0) = rng.normal(cx, 0.6);
            p(i, 1) = rng.normal(cy, 0.6);
        } else {
            p(i, 0) = rng.uniform(-2.0, spread + 2.0);
            p(i, 1) = rng.uniform(-2.0, spread + 2.0);
        }
    }
    return p;
}

reduce::Embedding labeled(const Matrix<double>& y, std::vector<std::uint16_t> labels) {
    reduce::Embedding e;
    e.y = y;
    e.labels = std::move(labels);
    return e;
}

} // namespace

TEST_CASE("dbscan: identical points form one cluster", "[cluster][dbscan]") {
    Matrix<double> p(12, 2, 3.0);
    const auto r = dbscan(p, {0.5, 12});
    CHECK(r.cluster_count == 1);
    CHECK(r.noise_count() == 0);
    for (int c : r.cluster) CHECK(c == 0);
}

TEST_CASE("dbscan: mutually distant points are all noise", "[cluster][dbscan]") {
    Matrix<double> p(10, 2);
    for (std::size_t i = 0; i < 10; ++i) p(i, 0) = 5.0 * static_cast<double>(i);
    const auto r = dbscan(p, {1.0, 2});
    CHECK(r.cluster_count == 0);
    CHECK(r.noise_count() == 10);
    // min_pts = 1: every point is its own core cluster.
    const auto solo = dbscan(p, {1.0, 1});
    CHECK(solo.cluster_count == 10);
    CHECK(solo.noise_count() == 0);
}

TEST_CASE("dbscan: boundary distance counts as a neighbour", "[cluster][dbscan]") {
    Matrix<double> p(2, 2, std::vector<double>{0.0, 0.0, 3.0, 4.0});
    CHECK(dbscan(p, {5.0, 2}).cluster_count == 1);
    CHECK(dbscan(p, {4.999, 2}).cluster_count == 0);
}

TEST_CASE("dbscan: border point goes to the earlier cluster", "[cluster][dbscan]") {
    // Two triangles of cores with one point in the middle, within eps of both.
    Matrix<double> p(7, 2, std::vector<double>{0, 0, 0, 0.5, 0.5, 0, 3, 0, 3, 0.5, 2.5, 0, 1.5, 0});
    const auto r = dbscan(p, {1.05, 4});
    // Point 6 sits at distance 1.0 from (0.5,0) and (2.5,0) only.
    CHECK(r.role[6] == Role::border);
    CHECK(r.cluster[6] == 0);
    CHECK(r.cluster[3] == 1);
}

TEST_CASE("dbscan: matches the brute-force oracle", "[cluster][dbscan][oracle]") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed + 1000);
        const std::size_t n = 200;
        const auto p = random_points(n, seed);
        const double eps = rng.uniform(0.2, 1.5);
        const std::size_t min_pts = 1 + rng.below(12);
        const auto r = dbscan(p, {eps, min_pts});
        const auto o = test::dbscan_oracle(p, eps, min_pts);
        INFO("seed " << seed << " eps " << eps << " min_pts " << min_pts);
        REQUIRE(r.cluster == o.cluster);
        REQUIRE(r.role == o.role);
    }
}

TEST_CASE("dbscan: grid index agrees with the oracle above the brute-force limit", "[cluster][dbscan][oracle]") {
    const auto p = random_points(2500, 77, 40.0);
    for (double eps : {0.3, 0.8}) {
        const dbscan_detail::NeighborIndex idx(p, eps);
        REQUIRE(idx.uses_grid());
        const auto r = dbscan(p, {eps, 6});
        const auto o = test::dbscan_oracle(p, eps, 6);
        CHECK(r.cluster == o.cluster);
        CHECK(r.role == o.role);
    }
}

TEST_CASE("dbscan: properties", "[cluster][dbscan][property]") {
    Rng rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 20 + rng.below(281);
        const auto p = random_points(n, rng.next_u64());
        const double eps = rng.uniform(0.2, 1.2);
        const std::size_t min_pts = 1 + rng.below(10);
        const auto r = dbscan(p, {eps, min_pts});

        // Core/noise sets do not depend on visit order.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(perm));
        Matrix<double> q(n, 2);
        for (std::size_t i = 0; i < n; ++i) q(i, 0) = p(perm[i], 0), q(i, 1) = p(perm[i], 1);
        const auto rq = dbscan(q, {eps, min_pts});
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE((rq.role[i] == Role::core) == (r.role[perm[i]] == Role::core));
            REQUIRE((rq.role[i] == Role::noise) == (r.role[perm[i]] == Role::noise));
        }
        // Core points in one cluster stay together.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rq.role[i] == Role::core && rq.role[j] == Role::core)
                    REQUIRE((rq.cluster[i] == rq.cluster[j]) == (r.cluster[perm[i]] == r.cluster[perm[j]]));

        // Larger eps never adds noise.
        const auto wider = dbscan(p, {eps * rng.uniform(1.0, 2.0), min_pts});
        REQUIRE(wider.noise_count() <= r.noise_count());

        // Partition and alpha consistency.
        for (std::size_t i = 0; i < n; ++i) REQUIRE((r.role[i] == Role::noise) == (r.cluster[i] == -1));
    }
}

TEST_CASE("dbscan: input validation", "[cluster][dbscan]") {
    Matrix<double> p(3, 2, 0.0);
    CHECK_THROWS_AS(dbscan(p, {0.0, 2}), ValidationError);
    CHECK_THROWS_AS(dbscan(p, {1.0, 0}), ValidationError);
    CHECK_THROWS_AS(dbscan(Matrix<double>(0, 2), {1.0, 2}), ValidationError);
    p(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(dbscan(p, {1.0, 2}), ValidationError);
}

TEST_CASE("default_config: percentile of the k-distance", "[cluster][default]") {
    const auto p = random_points(150, 3);
    const auto cfg = default_config(p, {10, 90.0});
    CHECK(cfg.min_pts == 10);
    // Independent computation: full sort of each row's distances.
    std::vector<double> kd;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < p.rows(); ++j)
            if (j != i) d.push_back(std::hypot(p(i, 0) - p(j, 0), p(i, 1) - p(j, 1)));
        std::sort(d.begin(), d.end());
        kd.push_back(d[8]);
    }
    std::sort(kd.begin(), kd.end());
    const double pos = 0.9 * 149.0;
    const auto lo = static_cast<std::size_t>(pos);
    const double expect = kd[lo] + (pos - static_cast<double>(lo)) * (kd[lo + 1] - kd[lo]);
    CHECK_THAT(cfg.eps, WithinAbs(expect, 1e-12));

    CHECK_THAT(percentile({1.0, 2.0, 3.0, 4.0}, 50.0), WithinAbs(2.5, 1e-15));
    CHECK(percentile({7.0}, 90.0) == 7.0);
    CHECK(default_config(Matrix<double>(1, 2, 0.0)).eps > 0.0);
    CHECK(default_config(Matrix<double>(5, 2, 1.0)).eps > 0.0);
}

TEST_CASE("cluster_per_class", "[cluster][per_class]") {
    const auto p = random_points(120, 9);
    SECTION("single class equals dbscan on the whole set") {
        const auto emb = labeled(p, std::vector<std::uint16_t>(120, 0));
        const DbscanConfig cfg{0.7, 5};
        const auto ca = cluster_per_class(emb, {{0, cfg}});
        const auto r = dbscan(p, cfg);
        CHECK(ca.cluster == r.cluster);
        CHECK(ca.role == r.role);
        CHECK(ca.params.at(0) == cfg);
    }
    SECTION("identical geometry in two classes gives identical patterns") {
        Matrix<double> both(240, 2);
        std::vector<std::uint16_t> labels(240);
        for (std::size_t i = 0; i < 120; ++i) {
            both(2 * i, 0) = p(i, 0);
            both(2 * i, 1) = p(i, 1);
            both(2 * i + 1, 0) = p(i, 0) + 1000.0;
            both(2 * i + 1, 1) = p(i, 1) - 500.0;
            labels[2 * i] = 0;
            labels[2 * i + 1] = 1;
        }
        const auto ca = cluster_per_class(labeled(both, labels));
        for (std::size_t i = 0; i < 120; ++i) {
            REQUIRE(ca.role[2 * i] == ca.role[2 * i + 1]);
            REQUIRE(ca.cluster[2 * i] == ca.cluster[2 * i + 1]);
        }
        CHECK_THAT(ca.params.at(0).eps, Catch::Matchers::WithinRel(ca.params.at(1).eps, 1e-12));
    }
    SECTION("classes without an override use the default rule") {
        std::vector<std::uint16_t> labels(120);
        for (std::size_t i = 0; i < 120; ++i) labels[i] = static_cast<std::uint16_t>(i % 3);
        const auto emb = labeled(p, labels);
        const auto ca = cluster_per_class(emb, {{1, DbscanConfig{0.4, 3}}});
        CHECK(ca.params.at(1) == DbscanConfig{0.4, 3});
        std::vector<std::size_t> idx0;
        for (std::size_t i = 0; i < 120; ++i)
            if (labels[i] == 0) idx0.push_back(i);
        CHECK(ca.params.at(0) == default_config(gather_rows(p, idx0)));
        const auto fixed = cluster_per_class(emb, {}, DbscanConfig{0.9, 4});
        CHECK(fixed.params.at(2) == DbscanConfig{0.9, 4});
    }
    SECTION("unlabeled embedding is rejected") {
        reduce::Embedding e;
        e.y = p;
        CHECK_THROWS_AS(cluster_per_class(e), ValidationError);
    }
}

TEST_CASE("build_manifest", "[cluster][manifest]") {
    const auto p = random_points(100, 4);
    std::vector<std::uint16_t> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<std::uint16_t>(i % 2);
    const auto emb = labeled(p, labels);

    SECTION("zero noise keeps everything") {
        const auto ca = cluster_per_class(emb, {}, DbscanConfig{1e6, 1});
        const auto m = build_manifest(ca, 0xabc, 2);
        CHECK(m.removed.empty());
        CHECK(m.kept.size() == 100);
        CHECK(m.method == dataset::FilterMethod::network_filtered);
    }
    SECTION("all noise is refused") {
        const auto ca = cluster_per_class(emb, {}, DbscanConfig{1e-6, 2});
        CHECK_THROWS_WITH(build_manifest(ca, 0xabc, 2), Catch::Matchers::ContainsSubstring("empty filtered dataset"));
    }
    SECTION("removed is exactly the noise set, with conservation") {
        const auto ca = cluster_per_class(emb, {}, DbscanConfig{1.5, 4});
        const auto m = build_manifest(ca, 0xabc, 2, dataset::StageParams{1, 30.0, 0, 0.0});
        CHECK(m.removed == ca.noise_indices());
        CHECK(m.kept.size() + m.removed.size() == 100);
        CHECK(m.class_params.at(0).eps == 1.5);
        CHECK_FALSE(m.removed.empty());
        std::size_t sum = 0;
        for (const auto& c : m.class_counts) sum += c.total;
        CHECK(sum == 100);
        const auto back = dataset::manifest_from_json(dataset::to_json(m));
        CHECK(back == m);
    }
}

TEST_CASE("reduction_report", "[cluster][report]") {
    SECTION("620 of 50000 removed") {
        dataset::FilterManifest m;
        m.source_rows = 50000;
        for (std::size_t i = 0; i < 620; ++i) m.removed.push_back(i * 80);
        m.kept = dataset::complement(50000, m.removed);
        m.method = dataset::FilterMethod::network_filtered;
        std::vector<dataset::Label> labels(50000);
        for (std::size_t i = 0; i < 50000; ++i) labels[i] = static_cast<dataset::Label>(i % 10);
        m.class_counts = dataset::count_by_class(labels, 10, m.removed);
        const auto s = reduction_report(m);
        CHECK(s.kept == 49380);
        CHECK_THAT(s.kept_percent, WithinAbs(98.76, 1e-9));
        CHECK(s.headline() == "98.76% or 49380 images");
        std::size_t total = 0, removed = 0;
        for (const auto& r : s.classes) {
            total += r.total;
            removed += r.removed;
        }
        CHECK(total == 50000);
        CHECK(removed == 620);
        CHECK(s.markdown().find("| all | 50000 | 620 | 49380 | 98.76% |") != std::string::npos);
    }
    SECTION("full manifest keeps 100%") {
        const auto ds = test::random_dataset(30, 2, 3, 1);
        const auto s = reduction_report(dataset::full_manifest(ds));
        CHECK(s.kept_percent == 100.0);
        CHECK(s.headline() == "100.00% or 30 images");
    }
}

TEST_CASE("assignment CSV", "[cluster][io]") {
    ClusterAssignment ca;
    ca.labels = {0, 1, 1};
    ca.cluster = {0, -1, 0};
    ca.role = {Role::core, Role::noise, Role::border};
    std::ostringstream out;
    write_assignment_csv(ca, out);
    CHECK(out.str() == "idx,class,cluster,role\n0,0,0,core\n1,1,-1,noise\n2,1,0,border\n");
    CHECK(ca.alpha(1) == 0);
    CHECK(ca.alpha(2) == 1);
}
