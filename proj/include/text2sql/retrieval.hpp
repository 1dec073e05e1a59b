#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/calibration.hpp"
#include "text2sql/catalog.hpp"
#include "text2sql/domain_instructions.hpp"
#include "text2sql/errors.hpp"
#include "text2sql/example_pipeline.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/sql_scan.hpp"
#include "text2sql/vector_store.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Question views and retrieval results
// ---------------------------------------------------------------------------

struct QuestionViews {
    std::string initial;
    std::string normalized;
    std::string main_clause;
    std::vector<std::string> concepts;  // entity labels

    std::string concept_text() const { return join(concepts, "; "); }
};

struct QuerySpec {
    std::string text;
    MetadataFilter filter;
    std::size_t n = 10;
};

enum class RetrievalStage {
    exact_match,
    normalized_match,
    main_clause_match,
    expanded_reranked,
    no_examples,
};

inline std::string_view stage_name(RetrievalStage stage) {
    switch (stage) {
        case RetrievalStage::exact_match: return "ExactMatch";
        case RetrievalStage::normalized_match: return "NormalizedMatch";
        case RetrievalStage::main_clause_match: return "MainClauseMatch";
        case RetrievalStage::expanded_reranked: return "ExpandedReranked";
        case RetrievalStage::no_examples: return "NoExamples";
    }
    return "?";
}

struct MatchedExample {
    std::string example_id;
    double similarity = 0.0;
};

struct RetrievalOutcome {
    RetrievalStage stage = RetrievalStage::no_examples;
    std::optional<std::string> direct_sql;        // stage I
    std::vector<std::string> sql_exact;           // stage II
    std::vector<std::string> sql_strong;          // stages III and V
    std::vector<std::string> sql_templates;       // stage IV leftovers
    std::vector<TableDocument> tables_from_examples;
    std::vector<MatchedExample> matched;
};

struct TableCandidates {
    std::vector<TableDocument> detected;    // content-similarity retrieval
    std::vector<TableDocument> rule_based;  // business-rule selection
    std::vector<TableDocument> total;       // union of the two
    std::vector<TableDocument> refined;     // after LLM refinement
};

// ---------------------------------------------------------------------------
// Retriever
// ---------------------------------------------------------------------------

class Retriever {
public:
    Retriever(VectorStore& store, Embedder& embedder, ChatProvider& chat, Reranker& reranker,
              ExamplePipeline& example_pipeline, const DocumentCatalog& documents,
              const ExampleCatalog& examples, std::size_t per_query_limit = 10)
        : store_(store),
          embedder_(embedder),
          chat_(chat),
          reranker_(reranker),
          example_pipeline_(example_pipeline),
          documents_(documents),
          examples_(examples),
          per_query_limit_(per_query_limit) {}

    // The live question gets the same treatment as a training example: no
    // SQL is available, so data sources are skipped.
    QuestionViews derive_views(const std::string& question) {
        if (trim(question).empty()) raise(ErrorCode::invalid_input, "empty question");
        QuestionViews views;
        views.initial = trim(question);
        auto extraction = example_pipeline_.normalize_and_extract(views.initial, std::nullopt);
        views.normalized = extraction.normalized;
        for (const auto& e : extraction.entities) views.concepts.push_back(e.label);
        auto [main_clause, details] = example_pipeline_.split_main_clause(views.initial);
        views.main_clause = main_clause;
        return views;
    }

    // The staged cascade. Each stage widens the searched categories and
    // lowers the threshold; the first stage that accepts wins and nothing
    // after it runs.
    RetrievalOutcome retrieve_examples(const QuestionViews& views, const ThresholdProfile& profile,
                                       json* trace = nullptr) {
        profile.validate();
        if (views.normalized.empty())
            raise(ErrorCode::invalid_input, "views lack a normalized question");
        RetrievalOutcome outcome;
        json stages = json::array();

        // stage I: exact question
        auto stage1 = best_per_example({views.initial}, {Category::init});
        auto matched1 = at_least(stage1, profile.tau_exact);
        record_stage(stages, "ExactMatch", profile.tau_exact, stage1, !matched1.empty());
        if (!matched1.empty()) {
            // return the stored SQL directly; a hit without SQL cannot resolve
            // this stage and falls through
            for (const auto& m : matched1) {
                auto record = examples_.get(m.example_id);
                if (record && record->sql) {
                    outcome.stage = RetrievalStage::exact_match;
                    outcome.direct_sql = record->sql;
                    outcome.matched = matched1;
                    finish(outcome, stages, trace);
                    return outcome;
                }
            }
        }

        // stage II: normalized representation
        auto stage2 = best_per_example({views.normalized}, {Category::init, Category::normalized});
        auto matched2 = at_least(stage2, profile.t_stage2);
        record_stage(stages, "NormalizedMatch", profile.t_stage2, stage2, !matched2.empty());
        if (!matched2.empty()) {
            outcome.stage = RetrievalStage::normalized_match;
            outcome.matched = matched2;
            outcome.sql_exact = sqls_of(matched2);
            finish(outcome, stages, trace);
            return outcome;
        }

        // stage III: normalized + main clause
        auto stage3 = best_per_example(
            {views.normalized, views.main_clause},
            {Category::init, Category::normalized, Category::main_clause});
        auto matched3 = at_least(stage3, profile.t_stage3);
        record_stage(stages, "MainClauseMatch", profile.t_stage3, stage3, !matched3.empty());
        if (!matched3.empty()) {
            outcome.stage = RetrievalStage::main_clause_match;
            outcome.matched = matched3;
            outcome.sql_strong = sqls_of(matched3);
            finish(outcome, stages, trace);
            return outcome;
        }

        // stage IV: every stored representation, lowest threshold
        std::vector<std::string> texts{views.initial, views.normalized, views.main_clause};
        if (!views.concepts.empty()) texts.push_back(views.concept_text());
        auto stage4 = best_per_example(texts, {Category::init, Category::normalized,
                                               Category::main_clause, Category::entity,
                                               Category::similar});
        auto candidates = at_least(stage4, profile.t_stage4);
        record_stage(stages, "ExpandedSearch", profile.t_stage4, stage4, !candidates.empty());

        // stage V: cross-encoder filter over the widened candidate set
        std::vector<MatchedExample> survivors;
        json rerank_trace = json::array();
        for (const auto& m : candidates) {
            auto record = examples_.get(m.example_id);
            if (!record) continue;
            double score = reranker_.rerank(views.initial, record->initial_question);
            bool accepted = score > profile.tau_rerank;
            rerank_trace.push_back({{"example", m.example_id},
                                    {"score", score},
                                    {"accepted", accepted}});
            if (accepted) survivors.push_back(m);
        }
        if (trace) (*trace)["rerank"] = rerank_trace;

        if (!survivors.empty()) {
            outcome.stage = RetrievalStage::expanded_reranked;
            outcome.matched = survivors;
            outcome.sql_strong = sqls_of(survivors);
            finish(outcome, stages, trace);
            return outcome;
        }

        outcome.stage = RetrievalStage::no_examples;
        outcome.sql_templates = sqls_of(candidates);
        finish(outcome, stages, trace);
        return outcome;
    }

    // Six-query documentation search over the metadata categories; the
    // per-formulation sets also feed the calibration overlap report.
    std::vector<std::pair<std::string, std::set<std::string>>> document_query_sets(
        const QuestionViews& views, std::size_t n) {
        MetadataFilter desc_entity{{Category::description, Category::entity},
                                   SourceKind::document};
        MetadataFilter conn_entity{{Category::connected_tables, Category::entity},
                                   SourceKind::document};
        MetadataFilter table_name{{Category::table_name}, SourceKind::document};
        std::vector<std::pair<std::string, QuerySpec>> specs;
        specs.emplace_back("z1", QuerySpec{views.normalized, desc_entity, n});
        specs.emplace_back("z2", QuerySpec{views.main_clause, desc_entity, n});
        if (!views.concepts.empty())
            specs.emplace_back("z3", QuerySpec{views.concept_text(), conn_entity, n});
        specs.emplace_back("z4", QuerySpec{views.normalized, table_name, n});
        specs.emplace_back("z5", QuerySpec{views.main_clause, table_name, n});
        if (!views.concepts.empty())
            specs.emplace_back("z6", QuerySpec{views.concept_text(), table_name, n});

        std::vector<std::pair<std::string, std::set<std::string>>> sets;
        for (const auto& [name, spec] : specs) {
            std::set<std::string> tables;
            if (!trim(spec.text).empty()) {
                for (const auto& hit : store_.query(embedder_.embed(spec.text), spec.filter, spec.n))
                    tables.insert(hit.entry.ref_id);
            }
            sets.emplace_back(name, std::move(tables));
        }
        return sets;
    }

    std::vector<TableDocument> retrieve_documents(const QuestionViews& views, std::size_t n = 10,
                                                  json* trace = nullptr) {
        auto sets = document_query_sets(views, n);
        std::set<std::string> names;
        json formulations = json::array();
        for (const auto& [name, tables] : sets) {
            names.insert(tables.begin(), tables.end());
            formulations.push_back(
                {{"query", name},
                 {"tables", std::vector<std::string>(tables.begin(), tables.end())}});
        }
        std::vector<TableDocument> detected;
        for (const auto& name : names) {
            if (auto doc = documents_.get(name)) detected.push_back(*doc);
        }
        if (trace) {
            (*trace)["documents"] = {{"formulations", formulations},
                                     {"detected", json(names)}};
        }
        return detected;
    }

    // Business-rule table selection; with no rules there is nothing to ask.
    std::vector<TableDocument> select_tables_by_rules(const std::string& normalized,
                                                      const std::vector<std::string>& rules,
                                                      json* trace = nullptr) {
        if (rules.empty()) return {};
        auto response = chat_.complete(make_request(
            "select_tables_by_rules", {{"normalized", normalized}, {"rules", join(rules, "\n")}}));
        std::vector<TableDocument> selected;
        json dropped = json::array();
        std::set<std::string> seen;
        for (const auto& t : response.payload.at("tables")) {
            std::string name = trim(t.get<std::string>());
            if (name.empty() || !seen.insert(name).second) continue;
            if (auto doc = documents_.get(name))
                selected.push_back(*doc);
            else
                dropped.push_back(name);
        }
        if (trace) (*trace)["rules_tables"] = {{"selected", names_of(selected)},
                                               {"unknown_dropped", dropped}};
        return selected;
    }

    // LLM refinement constrained to the candidate set. An empty refined set
    // is an error the caller may answer by keeping the candidates.
    std::vector<TableDocument> refine_tables(const QuestionViews& views,
                                             const DomainInstruction& instructions,
                                             const std::vector<std::string>& rules,
                                             const std::vector<TableDocument>& candidates,
                                             json* trace = nullptr) {
        if (candidates.empty()) raise(ErrorCode::invalid_input, "no candidate tables to refine");
        std::map<std::string, const TableDocument*> by_name;
        std::vector<std::string> digest;
        for (const auto& doc : candidates) {
            by_name.emplace(doc.name, &doc);
            std::vector<std::string> cols;
            for (const auto& c : doc.columns) cols.push_back(c.column);
            digest.push_back(doc.name + ": " + doc.summary + " Columns: " + join(cols, ", "));
        }
        auto response = chat_.complete(
            make_request("refine_tables", {{"normalized", views.normalized},
                                           {"instructions", instructions.text},
                                           {"rules", join(rules, "\n")},
                                           {"candidates", join(digest, "\n")}}));
        std::vector<TableDocument> refined;
        std::set<std::string> seen;
        for (const auto& t : response.payload.at("tables")) {
            std::string name = trim(t.get<std::string>());
            if (name.empty() || !seen.insert(name).second) continue;
            auto it = by_name.find(name);
            if (it != by_name.end()) refined.push_back(*it->second);
        }
        if (trace) (*trace)["refined"] = names_of(refined);
        if (refined.empty())
            raise(ErrorCode::refinement_empty, "refinement left no candidate table");
        return refined;
    }

private:
    // Max similarity per example over several query texts and a category set.
    std::vector<MatchedExample> best_per_example(const std::vector<std::string>& texts,
                                                 std::set<Category> categories) {
        MetadataFilter filter{std::move(categories), SourceKind::example};
        std::map<std::string, double> best;
        for (const auto& text : texts) {
            if (trim(text).empty()) continue;
            for (const auto& hit : store_.query(embedder_.embed(text), filter, per_query_limit_)) {
                auto [it, inserted] = best.emplace(hit.entry.ref_id, hit.similarity);
                if (!inserted) it->second = std::max(it->second, hit.similarity);
            }
        }
        std::vector<MatchedExample> out;
        for (const auto& [id, sim] : best) out.push_back({id, sim});
        std::sort(out.begin(), out.end(), [](const MatchedExample& a, const MatchedExample& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.example_id < b.example_id;
        });
        return out;
    }

    static std::vector<MatchedExample> at_least(const std::vector<MatchedExample>& hits,
                                                double threshold) {
        std::vector<MatchedExample> out;
        for (const auto& h : hits)
            if (h.similarity >= threshold) out.push_back(h);
        return out;
    }

    std::vector<std::string> sqls_of(const std::vector<MatchedExample>& matched) const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& m : matched) {
            auto record = examples_.get(m.example_id);
            if (!record || !record->sql) continue;
            if (seen.insert(*record->sql).second) out.push_back(*record->sql);
        }
        return out;
    }

    // Tables referenced by the matched examples, resolved to their documents.
    // A table the examples use but nobody documented still belongs to the
    // set; it carries a name-only document so generation may target it.
    void attach_example_tables(RetrievalOutcome& outcome, json* trace) const {
        std::set<std::string> names;
        for (const auto& m : outcome.matched) {
            auto record = examples_.get(m.example_id);
            if (!record) continue;
            if (record->sql) {
                try {
                    for (const auto& t : extract_sql_tables(*record->sql)) names.insert(t);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::no_tables_found) throw;
                }
            }
            for (const auto& src : record->data_sources) names.insert(casefold(src.table));
        }
        json undocumented = json::array();
        for (const auto& name : names) {
            if (auto doc = documents_.get(name)) {
                outcome.tables_from_examples.push_back(*doc);
            } else {
                TableDocument stub;
                stub.name = name;
                outcome.tables_from_examples.push_back(std::move(stub));
                undocumented.push_back(name);
            }
        }
        if (trace && !undocumented.empty()) (*trace)["undocumented_example_tables"] = undocumented;
    }

    void finish(RetrievalOutcome& outcome, json& stages, json* trace) const {
        if (outcome.stage != RetrievalStage::no_examples) attach_example_tables(outcome, trace);
        if (trace) {
            (*trace)["stages"] = stages;
            (*trace)["examples_stage"] = std::string(stage_name(outcome.stage));
        }
    }

    static void record_stage(json& stages, std::string_view name, double threshold,
                             const std::vector<MatchedExample>& hits, bool accepted) {
        json hit_list = json::array();
        for (const auto& h : hits)
            hit_list.push_back({{"example", h.example_id}, {"similarity", h.similarity}});
        stages.push_back({{"stage", std::string(name)},
                          {"threshold", threshold},
                          {"hits", hit_list},
                          {"accepted", accepted}});
    }

    static std::vector<std::string> names_of(const std::vector<TableDocument>& docs) {
        std::vector<std::string> out;
        for (const auto& d : docs) out.push_back(d.name);
        return out;
    }

    VectorStore& store_;
    Embedder& embedder_;
    ChatProvider& chat_;
    Reranker& reranker_;
    ExamplePipeline& example_pipeline_;
    const DocumentCatalog& documents_;
    const ExampleCatalog& examples_;
    std::size_t per_query_limit_;
};

}  // namespace text2sql
