#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/vector_store.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Nearest-rank percentile: sort ascending, take the element at 1-based index
// ceil(p/100 * n); p = 0 yields the first element. Always a member of the
// input.
// ---------------------------------------------------------------------------

inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) raise(ErrorCode::empty_input, "percentile of an empty list");
    if (p < 0.0 || p > 100.0)
        raise(ErrorCode::invalid_input, "percentile p out of [0,100]: " + std::to_string(p));
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    std::size_t rank = p == 0.0 ? 1 : static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::max<std::size_t>(1, std::min<std::size_t>(rank, values.size()));
    return values[rank - 1];
}

// ---------------------------------------------------------------------------
// Intra/inter-group similarity distributions
// ---------------------------------------------------------------------------

struct LabeledVector {
    Category category = Category::normalized;
    EmbeddingVector vector;
};

struct VectorGroup {
    std::string group_id;  // owning example id
    std::vector<LabeledVector> members;
};

// One distribution set for one category scope.
struct ScopeStats {
    std::vector<double> intra_nn;    // per vector: max similarity within its group
    std::vector<double> inter_nn;    // per vector: max similarity to any other group
    std::vector<double> intra_full;  // all same-group pairs
    std::vector<double> inter_full;  // all cross-group pairs
};

// The three scopes the retrieval cascade calibrates against: normalized
// embeddings alone, normalized plus main clause, and the expanded set that
// also includes entity and init embeddings.
struct SimilarityStats {
    ScopeStats normalized;
    ScopeStats norm_main;
    ScopeStats full;
};

namespace detail {

inline ScopeStats scope_stats(const std::vector<VectorGroup>& groups,
                              const std::set<Category>& scope) {
    struct Flat {
        std::size_t group;
        const EmbeddingVector* vector;
    };
    std::vector<Flat> flat;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& member : groups[g].members)
            if (scope.count(member.category)) flat.push_back({g, &member.vector});

    ScopeStats stats;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        double best_intra = -1.0, best_inter = -1.0;
        for (std::size_t j = 0; j < flat.size(); ++j) {
            if (i == j) continue;
            double sim = similarity(*flat[i].vector, *flat[j].vector);
            if (flat[i].group == flat[j].group)
                best_intra = std::max(best_intra, sim);
            else
                best_inter = std::max(best_inter, sim);
            if (j > i) {
                if (flat[i].group == flat[j].group)
                    stats.intra_full.push_back(sim);
                else
                    stats.inter_full.push_back(sim);
            }
        }
        if (best_intra >= 0.0) stats.intra_nn.push_back(best_intra);
        if (best_inter >= 0.0) stats.inter_nn.push_back(best_inter);
    }
    return stats;
}

}  // namespace detail

inline SimilarityStats pairwise_similarities(const std::vector<VectorGroup>& groups) {
    SimilarityStats stats;
    stats.normalized = detail::scope_stats(groups, {Category::normalized});
    stats.norm_main = detail::scope_stats(groups, {Category::normalized, Category::main_clause});
    stats.full = detail::scope_stats(groups, {Category::normalized, Category::main_clause,
                                              Category::entity, Category::init});
    return stats;
}

// ---------------------------------------------------------------------------
// Threshold profile
// ---------------------------------------------------------------------------

struct ThresholdProfile {
    double tau_exact = 0.995;  // stage I: near-identical question
    double t_stage2 = 0.95;    // P95 of inter-group NN similarity, normalized scope
    double t_stage3 = 0.96;    // P99 of inter-group NN similarity, normalized+main-clause scope
    double t_stage4 = 0.82;    // P01 of intra-group full-pairwise similarity
    double tau_rerank = 0.5;   // cross-encoder acceptance
    std::string provenance = "default";  // "default" | "calibrated"
    std::string calibrated_at;

    void validate() const {
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(tau_exact) || !in_unit(t_stage2) || !in_unit(t_stage3) || !in_unit(t_stage4) ||
            !in_unit(tau_rerank))
            raise(ErrorCode::invalid_profile, "thresholds must lie in [0,1]");
        if (!(t_stage4 <= t_stage3 && t_stage3 <= tau_exact))
            raise(ErrorCode::invalid_profile,
                  "ordering violated: need t_stage4 <= t_stage3 <= tau_exact, got " +
                      std::to_string(t_stage4) + ", " + std::to_string(t_stage3) + ", " +
                      std::to_string(tau_exact));
    }

    json to_json() const {
        return json{{"tau_exact", tau_exact},   {"t_stage2", t_stage2},
                    {"t_stage3", t_stage3},     {"t_stage4", t_stage4},
                    {"tau_rerank", tau_rerank}, {"provenance", provenance},
                    {"calibrated_at", calibrated_at}};
    }

    static ThresholdProfile from_json(const json& j) {
        ThresholdProfile p;
        p.tau_exact = j.value("tau_exact", p.tau_exact);
        p.t_stage2 = j.value("t_stage2", p.t_stage2);
        p.t_stage3 = j.value("t_stage3", p.t_stage3);
        p.t_stage4 = j.value("t_stage4", p.t_stage4);
        p.tau_rerank = j.value("tau_rerank", p.tau_rerank);
        p.provenance = j.value("provenance", p.provenance);
        p.calibrated_at = j.value("calibrated_at", p.calibrated_at);
        p.validate();
        return p;
    }
};

struct ThresholdOverrides {
    std::optional<double> tau_exact, t_stage2, t_stage3, t_stage4, tau_rerank;
};

inline ThresholdProfile default_profile() { return ThresholdProfile{}; }

// Derives the stage thresholds from the measured distributions; any scope
// without data keeps its default. Overrides win over both.
inline ThresholdProfile calibrate(const SimilarityStats& stats,
                                  const ThresholdOverrides& overrides = {}) {
    ThresholdProfile profile;
    if (!stats.normalized.inter_nn.empty())
        profile.t_stage2 = percentile(stats.normalized.inter_nn, 95.0);
    if (!stats.norm_main.inter_nn.empty())
        profile.t_stage3 = percentile(stats.norm_main.inter_nn, 99.0);
    if (!stats.full.intra_full.empty())
        profile.t_stage4 = percentile(stats.full.intra_full, 1.0);
    profile.provenance = "calibrated";
    if (overrides.tau_exact) profile.tau_exact = *overrides.tau_exact;
    if (overrides.t_stage2) profile.t_stage2 = *overrides.t_stage2;
    if (overrides.t_stage3) profile.t_stage3 = *overrides.t_stage3;
    if (overrides.t_stage4) profile.t_stage4 = *overrides.t_stage4;
    if (overrides.tau_rerank) profile.tau_rerank = *overrides.tau_rerank;
    profile.validate();
    return profile;
}

// ---------------------------------------------------------------------------
// Rand index over two set-membership partitions of a universe
// ---------------------------------------------------------------------------

inline double rand_index(const std::set<std::string>& set_a, const std::set<std::string>& set_b,
                         const std::set<std::string>& universe) {
    if (universe.size() < 2)
        raise(ErrorCode::invalid_input, "rand index needs a universe of >= 2 elements");
    for (const auto& x : set_a)
        if (!universe.count(x))
            raise(ErrorCode::invalid_input, "set element '" + x + "' outside the universe");
    for (const auto& x : set_b)
        if (!universe.count(x))
            raise(ErrorCode::invalid_input, "set element '" + x + "' outside the universe");

    std::vector<std::string> elems(universe.begin(), universe.end());
    std::size_t agreeing = 0, total = 0;
    for (std::size_t i = 0; i < elems.size(); ++i) {
        for (std::size_t j = i + 1; j < elems.size(); ++j) {
            bool together_a = set_a.count(elems[i]) == set_a.count(elems[j]);
            bool together_b = set_b.count(elems[i]) == set_b.count(elems[j]);
            agreeing += together_a == together_b ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(agreeing) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Overlap report: how much the different query formulations agree
// ---------------------------------------------------------------------------

struct OverlapReport {
    struct Formulation {
        std::string name;
        std::set<std::string> tables;
    };
    std::vector<Formulation> formulations;
    // (formulation a, formulation b, rand index)
    std::vector<std::tuple<std::string, std::string, double>> rand_indices;
    std::size_t unique_tables = 0;

    json to_json() const {
        json out{{"unique_tables", unique_tables}};
        out["formulations"] = json::array();
        for (const auto& f : formulations)
            out["formulations"].push_back(
                {{"name", f.name}, {"tables", std::vector<std::string>(f.tables.begin(), f.tables.end())}});
        out["rand_indices"] = json::array();
        for (const auto& [a, b, ri] : rand_indices)
            out["rand_indices"].push_back({{"a", a}, {"b", b}, {"rand_index", ri}});
        return out;
    }
};

inline OverlapReport make_overlap_report(
    const std::vector<std::pair<std::string, std::set<std::string>>>& formulation_sets,
    const std::set<std::string>& universe) {
    OverlapReport report;
    std::set<std::string> all;
    for (const auto& [name, tables] : formulation_sets) {
        report.formulations.push_back({name, tables});
        all.insert(tables.begin(), tables.end());
    }
    report.unique_tables = all.size();
    if (universe.size() >= 2) {
        for (std::size_t i = 0; i < report.formulations.size(); ++i)
            for (std::size_t j = i + 1; j < report.formulations.size(); ++j)
                report.rand_indices.emplace_back(
                    report.formulations[i].name, report.formulations[j].name,
                    rand_index(report.formulations[i].tables, report.formulations[j].tables,
                               universe));
    }
    return report;
}

}  // namespace text2sql
