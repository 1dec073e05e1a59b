#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/errors.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/retrieval.hpp"
#include "text2sql/sql_scan.hpp"

namespace text2sql {

enum class GenerationMode {
    direct_output,
    exact_example_based,
    strongly_aligned_example_based,
    documentation_driven,
};

inline std::string_view mode_name(GenerationMode mode) {
    switch (mode) {
        case GenerationMode::direct_output: return "Direct";
        case GenerationMode::exact_example_based: return "ExactExampleBased";
        case GenerationMode::strongly_aligned_example_based: return "StronglyAlignedExampleBased";
        case GenerationMode::documentation_driven: return "DocumentationDriven";
    }
    return "?";
}

struct GenerationPlan {
    GenerationMode mode = GenerationMode::documentation_driven;
    std::vector<std::string> sql_examples;
    std::vector<TableDocument> tables;
    std::vector<std::string> provenance;  // matched example ids / table names

    std::vector<std::string> table_names() const {
        std::vector<std::string> names;
        for (const auto& t : tables) names.push_back(t.name);
        return names;
    }
};

struct SqlViolation {
    bool no_tables = false;
    std::vector<std::string> offending_tables;

    std::string describe() const {
        if (no_tables) return "the SQL references no tables";
        return "the SQL references tables outside the allowed set: " +
               join(offending_tables, ", ");
    }
};

struct GeneratedSql {
    std::string sql;
    GenerationMode mode = GenerationMode::direct_output;
    std::set<std::string> referenced_tables;
    std::string notes;
};

// Mechanical containment check: every table the SQL names must be in the
// allowed set. Returns nullopt when the SQL is clean.
inline std::optional<SqlViolation> validate_sql(const std::string& sql,
                                                const std::vector<std::string>& allowed_tables) {
    if (trim(sql).empty()) raise(ErrorCode::invalid_input, "empty SQL");
    std::set<std::string> allowed;
    for (const auto& name : allowed_tables) allowed.insert(casefold(name));
    std::set<std::string> referenced;
    try {
        referenced = extract_sql_tables(sql);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::no_tables_found) throw;
        return SqlViolation{true, {}};
    }
    SqlViolation violation;
    for (const auto& table : referenced)
        if (!allowed.count(table)) violation.offending_tables.push_back(table);
    if (violation.offending_tables.empty()) return std::nullopt;
    return violation;
}

// Maps the retrieval outcome onto a generation mode. Total over every stage
// and emptiness combination; the only failure is the empty documentation
// path.
inline GenerationPlan plan_generation(const RetrievalOutcome& outcome,
                                      const std::vector<TableDocument>& refined) {
    GenerationPlan plan;
    switch (outcome.stage) {
        case RetrievalStage::exact_match:
            if (!outcome.direct_sql)
                raise(ErrorCode::invalid_input, "exact match outcome lacks its SQL");
            plan.mode = GenerationMode::direct_output;
            plan.sql_examples = {*outcome.direct_sql};
            plan.tables = outcome.tables_from_examples;
            break;
        case RetrievalStage::normalized_match:
            plan.mode = GenerationMode::exact_example_based;
            plan.sql_examples = outcome.sql_exact;
            plan.tables = outcome.tables_from_examples;
            break;
        case RetrievalStage::main_clause_match:
        case RetrievalStage::expanded_reranked:
            plan.mode = GenerationMode::strongly_aligned_example_based;
            plan.sql_examples = outcome.sql_strong;
            plan.tables = outcome.tables_from_examples;
            break;
        case RetrievalStage::no_examples:
            if (refined.empty())
                raise(ErrorCode::no_context, "no examples and no tables retrieved");
            plan.mode = GenerationMode::documentation_driven;
            plan.sql_examples = outcome.sql_templates;
            plan.tables = refined;
            break;
    }
    for (const auto& m : outcome.matched) plan.provenance.push_back("example:" + m.example_id);
    for (const auto& t : plan.tables) plan.provenance.push_back("table:" + t.name);
    return plan;
}

class SqlGenerator {
public:
    explicit SqlGenerator(ChatProvider& chat) : chat_(chat) {}

    // Direct mode echoes the stored SQL without any model call. The two
    // prompted modes get one corrective reprompt when the produced SQL
    // references tables outside the plan.
    GeneratedSql generate_sql(const QuestionViews& views, const GenerationPlan& plan) {
        if (plan.mode == GenerationMode::direct_output) {
            if (plan.sql_examples.size() != 1)
                raise(ErrorCode::invalid_input, "direct plan must carry exactly one SQL");
            GeneratedSql result;
            result.sql = plan.sql_examples.front();
            result.mode = plan.mode;
            try {
                result.referenced_tables = extract_sql_tables(result.sql);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::no_tables_found) throw;
            }
            return result;
        }
        if (plan.mode == GenerationMode::documentation_driven && plan.tables.empty())
            raise(ErrorCode::no_context, "documentation-driven plan without tables");

        std::string violation_note;
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto response = chat_.complete(build_request(views, plan, violation_note));
            GeneratedSql result;
            result.sql = trim(response.payload.at("sql").get<std::string>());
            result.mode = plan.mode;
            result.notes = response.payload.value("notes", "");
            auto violation = validate_sql(result.sql, plan.table_names());
            if (!violation) {
                result.referenced_tables = extract_sql_tables(result.sql);
                return result;
            }
            violation_note = violation->describe();
        }
        raise(ErrorCode::invalid_generation, violation_note);
    }

private:
    PromptRequest build_request(const QuestionViews& views, const GenerationPlan& plan,
                                const std::string& violation_note) const {
        std::vector<std::string> table_digest;
        for (const auto& t : plan.tables) {
            std::vector<std::string> cols;
            for (const auto& c : t.columns) cols.push_back(c.column);
            table_digest.push_back(t.name + ": " + t.summary + " Columns: " + join(cols, ", ") +
                                   ". " + t.dependencies_thoughts);
        }
        std::string violation_slot =
            violation_note.empty()
                ? ""
                : "Previous attempt rejected: " + violation_note + ". Correct the SQL.";
        if (plan.mode == GenerationMode::documentation_driven) {
            return make_request("generate_sql_documentation_driven",
                                {{"question", views.initial},
                                 {"normalized", views.normalized},
                                 {"tables", join(table_digest, "\n")},
                                 {"templates", join(plan.sql_examples, "\n---\n")},
                                 {"violation", violation_slot}});
        }
        return make_request("generate_sql_example_driven",
                            {{"question", views.initial},
                             {"normalized", views.normalized},
                             {"examples", join(plan.sql_examples, "\n---\n")},
                             {"tables", join(table_digest, "\n")},
                             {"violation", violation_slot}});
    }

    ChatProvider& chat_;
};

}  // namespace text2sql
