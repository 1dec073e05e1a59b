#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"
#include "text2sql/calibration.hpp"

using namespace text2sql;
using t2stest::planar_vector;
using t2stest::random_vector;

TEST_CASE("percentile nearest-rank hand cases") {
    std::vector<double> one_to_hundred;
    for (int i = 1; i <= 100; ++i) one_to_hundred.push_back(i);
    REQUIRE(percentile(one_to_hundred, 5) == 5.0);        // ceil(0.05*100) = 5th
    REQUIRE(percentile({0.7}, 0) == 0.7);
    REQUIRE(percentile({0.7}, 50) == 0.7);
    REQUIRE(percentile({0.7}, 100) == 0.7);
    REQUIRE(percentile({1, 2, 3, 4}, 50) == 2.0);         // ceil(0.5*4) = 2nd
    REQUIRE(percentile({1, 2, 3, 4}, 100) == 4.0);
    REQUIRE(percentile({3, 1, 2}, 0) == 1.0);
}

TEST_CASE("percentile validation") {
    REQUIRE_THROWS_MATCHES(percentile({}, 50), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.code() == ErrorCode::empty_input;
                           }));
    REQUIRE_THROWS_AS(percentile({1.0}, -1), Error);
    REQUIRE_THROWS_AS(percentile({1.0}, 101), Error);
}

TEST_CASE("percentile equals the sort-and-index oracle on random lists") {
    std::mt19937 rng(42);
    std::uniform_int_distribution<int> size_dist(1, 1000);
    std::uniform_real_distribution<double> value_dist(0.0, 1.0);
    std::uniform_real_distribution<double> p_dist(0.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> values(static_cast<std::size_t>(size_dist(rng)));
        for (auto& v : values) v = value_dist(rng);
        double p = p_dist(rng);
        REQUIRE(percentile(values, p) == t2stest::oracle_percentile(values, p));
    }
}

TEST_CASE("percentile is monotone in p and returns a member") {
    std::mt19937 rng(43);
    std::uniform_real_distribution<double> value_dist(0.0, 1.0);
    std::vector<double> values(257);
    for (auto& v : values) v = value_dist(rng);
    double last = percentile(values, 0);
    for (double p = 0; p <= 100.0; p += 2.5) {
        double v = percentile(values, p);
        REQUIRE(v >= last);
        REQUIRE(std::count(values.begin(), values.end(), v) > 0);
        last = v;
    }
}

TEST_CASE("pairwise similarities on duplicate and orthogonal groups") {
    // two groups of identical duplicated vectors: intra NN all 1.0
    std::vector<VectorGroup> groups(2);
    groups[0].group_id = "g1";
    groups[1].group_id = "g2";
    for (int i = 0; i < 3; ++i) {
        groups[0].members.push_back({Category::normalized, planar_vector(4, 0.0)});
        groups[1].members.push_back({Category::normalized, planar_vector(4, 1.0)});
    }
    auto stats = pairwise_similarities(groups);
    REQUIRE(stats.normalized.intra_nn.size() == 6);
    for (double v : stats.normalized.intra_nn) REQUIRE(v == Catch::Approx(1.0).margin(1e-12));

    // groups on orthogonal axes: all cross-group pairs at 0.5
    std::vector<VectorGroup> ortho(2);
    ortho[0].group_id = "a";
    ortho[1].group_id = "b";
    ortho[0].members.push_back({Category::normalized, EmbeddingVector::of({1, 0, 0, 0})});
    ortho[0].members.push_back({Category::normalized, EmbeddingVector::of({0, 1, 0, 0})});
    ortho[1].members.push_back({Category::normalized, EmbeddingVector::of({0, 0, 1, 0})});
    ortho[1].members.push_back({Category::normalized, EmbeddingVector::of({0, 0, 0, 1})});
    auto ortho_stats = pairwise_similarities(ortho);
    REQUIRE(ortho_stats.normalized.inter_full.size() == 4);
    for (double v : ortho_stats.normalized.inter_full)
        REQUIRE(v == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("single-member groups contribute nothing to intra_nn") {
    std::vector<VectorGroup> groups(2);
    groups[0].group_id = "solo";
    groups[0].members.push_back({Category::normalized, planar_vector(4, 0.2)});
    groups[1].group_id = "pair";
    groups[1].members.push_back({Category::normalized, planar_vector(4, 0.4)});
    groups[1].members.push_back({Category::normalized, planar_vector(4, 0.5)});
    auto stats = pairwise_similarities(groups);
    REQUIRE(stats.normalized.intra_nn.size() == 2);  // only the two-member group
    REQUIRE(stats.normalized.inter_nn.size() == 3);
}

TEST_CASE("pairwise similarities equals an exhaustive double-loop oracle") {
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> members(1, 6);
    std::uniform_int_distribution<int> cat_pick(0, 3);
    const Category cats[] = {Category::normalized, Category::main_clause, Category::entity,
                             Category::init};
    std::vector<VectorGroup> groups(5);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].group_id = "g" + std::to_string(g);
        int count = members(rng);
        for (int i = 0; i < count; ++i)
            groups[g].members.push_back({cats[cat_pick(rng)], random_vector(rng, 6)});
    }
    auto stats = pairwise_similarities(groups);

    // oracle over the normalized∪main_clause scope
    struct Item {
        std::size_t group;
        EmbeddingVector v;
    };
    std::vector<Item> flat;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& m : groups[g].members)
            if (m.category == Category::normalized || m.category == Category::main_clause)
                flat.push_back({g, m.vector});

    std::vector<double> intra_nn, inter_nn, intra_full, inter_full;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        double bi = -1, be = -1;
        for (std::size_t j = 0; j < flat.size(); ++j) {
            if (i == j) continue;
            double s = similarity(flat[i].v, flat[j].v);
            if (flat[i].group == flat[j].group) {
                bi = std::max(bi, s);
                if (j > i) intra_full.push_back(s);
            } else {
                be = std::max(be, s);
                if (j > i) inter_full.push_back(s);
            }
        }
        if (bi >= 0) intra_nn.push_back(bi);
        if (be >= 0) inter_nn.push_back(be);
    }
    REQUIRE(stats.norm_main.intra_nn == intra_nn);
    REQUIRE(stats.norm_main.inter_nn == inter_nn);
    REQUIRE(stats.norm_main.intra_full == intra_full);
    REQUIRE(stats.norm_main.inter_full == inter_full);
}

TEST_CASE("nearest-neighbour values are maxima over the group") {
    std::mt19937 rng(77);
    std::vector<VectorGroup> groups(3);
    for (std::size_t g = 0; g < 3; ++g) {
        groups[g].group_id = "g" + std::to_string(g);
        for (int i = 0; i < 4; ++i)
            groups[g].members.push_back({Category::normalized, random_vector(rng, 5)});
    }
    auto stats = pairwise_similarities(groups);
    std::size_t idx = 0;
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t i = 0; i < 4; ++i, ++idx) {
            double reported = stats.normalized.intra_nn[idx];
            for (std::size_t j = 0; j < 4; ++j) {
                if (i == j) continue;
                REQUIRE(reported >=
                        similarity(groups[g].members[i].vector, groups[g].members[j].vector));
            }
        }
    }
}

TEST_CASE("default profile carries the published thresholds") {
    auto profile = default_profile();
    REQUIRE(profile.t_stage3 == 0.96);
    REQUIRE(profile.t_stage4 == 0.82);
    REQUIRE(profile.tau_exact == 0.995);
    REQUIRE(profile.provenance == "default");
    REQUIRE_NOTHROW(profile.validate());
}

TEST_CASE("calibrate derives thresholds from the distributions") {
    SimilarityStats stats;
    for (int i = 1; i <= 100; ++i) {
        stats.normalized.inter_nn.push_back(0.5 + i * 0.001);
        stats.norm_main.inter_nn.push_back(0.5 + i * 0.002);
        stats.full.intra_full.push_back(0.6 + i * 0.003);
    }
    auto profile = calibrate(stats);
    REQUIRE(profile.t_stage2 == percentile(stats.normalized.inter_nn, 95));
    REQUIRE(profile.t_stage3 == percentile(stats.norm_main.inter_nn, 99));
    REQUIRE(profile.t_stage4 == percentile(stats.full.intra_full, 1));
    REQUIRE(profile.provenance == "calibrated");
}

TEST_CASE("calibrate rejects an inverted ordering") {
    SimilarityStats stats;
    stats.norm_main.inter_nn = {0.3, 0.31, 0.32};   // P99 -> 0.32
    stats.full.intra_full = {0.9, 0.91, 0.92};      // P01 -> 0.9 > t_stage3
    REQUIRE_THROWS_MATCHES(calibrate(stats), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.code() == ErrorCode::invalid_profile;
                           }));
}

TEST_CASE("calibrate with no stats keeps the defaults") {
    auto profile = calibrate(SimilarityStats{});
    REQUIRE(profile.t_stage3 == 0.96);
    REQUIRE(profile.t_stage4 == 0.82);
}

TEST_CASE("rand index hand case and degenerate cases") {
    std::set<std::string> universe{"t1", "t2", "t3", "t4"};
    REQUIRE(rand_index({"t1", "t2"}, {"t1", "t3"}, universe) == Catch::Approx(2.0 / 6.0));
    REQUIRE(rand_index({"t1", "t2"}, {"t1", "t2"}, universe) == 1.0);
    // complement partition is the same partition
    REQUIRE(rand_index({"t1", "t2"}, {"t3", "t4"}, universe) == 1.0);
}

TEST_CASE("rand index validation") {
    REQUIRE_THROWS_AS(rand_index({"a"}, {"a"}, {"a"}), Error);
    REQUIRE_THROWS_AS(rand_index({"z"}, {}, {"a", "b"}), Error);
}

TEST_CASE("rand index is symmetric and equals the pair-enumeration oracle") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> universe_size(2, 20);
    std::uniform_int_distribution<int> coin(0, 2);
    for (int trial = 0; trial < 200; ++trial) {
        std::set<std::string> universe, a, b;
        int n = universe_size(rng);
        for (int i = 0; i < n; ++i) {
            std::string name = "t" + std::to_string(i);
            universe.insert(name);
            if (coin(rng) == 0) a.insert(name);
            if (coin(rng) == 0) b.insert(name);
        }
        double ab = rand_index(a, b, universe);
        REQUIRE(ab == rand_index(b, a, universe));
        REQUIRE(ab == t2stest::oracle_rand_index(a, b, universe));
    }
}

TEST_CASE("overlap report counts unique tables and pairwise agreement") {
    std::set<std::string> universe{"a", "b", "c", "d"};
    auto report = make_overlap_report(
        {{"z1", {"a", "b"}}, {"z2", {"a", "c"}}, {"z3", {}}}, universe);
    REQUIRE(report.unique_tables == 3);
    REQUIRE(report.rand_indices.size() == 3);
    auto [n1, n2, ri] = report.rand_indices.front();
    REQUIRE(n1 == "z1");
    REQUIRE(n2 == "z2");
    REQUIRE(ri == Catch::Approx(2.0 / 6.0));
}
