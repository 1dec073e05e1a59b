#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"
#include "text2sql/sqlgen.hpp"

using namespace text2sql;
using t2stest::json;

namespace {

TableDocument doc_named(const std::string& name) {
    TableDocument d;
    d.name = name;
    d.summary = "About " + name + ".";
    return d;
}

QuestionViews simple_views() {
    QuestionViews views;
    views.initial = "How many people RSVP'd to the climate march event last month?";
    views.normalized = "Count of people who responded to a specific event over a time range";
    views.main_clause = "count of people";
    return views;
}

RetrievalOutcome outcome_for(RetrievalStage stage) {
    RetrievalOutcome outcome;
    outcome.stage = stage;
    switch (stage) {
        case RetrievalStage::exact_match:
            outcome.direct_sql = t2stest::kEventsSql;
            outcome.matched = {{"e1", 1.0}};
            break;
        case RetrievalStage::normalized_match:
            outcome.sql_exact = {t2stest::kEventsSql};
            outcome.matched = {{"e1", 0.97}};
            outcome.tables_from_examples = {doc_named("events")};
            break;
        case RetrievalStage::main_clause_match:
        case RetrievalStage::expanded_reranked:
            outcome.sql_strong = {t2stest::kRsvpSql};
            outcome.matched = {{"e2", 0.9}};
            outcome.tables_from_examples = {doc_named("events"), doc_named("rsvps")};
            break;
        case RetrievalStage::no_examples:
            outcome.sql_templates = {t2stest::kRsvpSql};
            break;
    }
    return outcome;
}

}  // namespace

TEST_CASE("validate_sql containment checks") {
    REQUIRE(validate_sql(t2stest::kRsvpSql, {"events", "rsvps"}) == std::nullopt);

    auto violation = validate_sql(t2stest::kRsvpSql, {"events"});
    REQUIRE(violation);
    REQUIRE(violation->offending_tables == std::vector<std::string>{"rsvps"});

    auto no_tables = validate_sql("SELECT 1", {"events"});
    REQUIRE(no_tables);
    REQUIRE(no_tables->no_tables);

    REQUIRE_THROWS_AS(validate_sql("  ", {"a"}), Error);
}

TEST_CASE("plan_generation is total over stage and emptiness") {
    auto direct = plan_generation(outcome_for(RetrievalStage::exact_match), {});
    REQUIRE(direct.mode == GenerationMode::direct_output);
    REQUIRE(direct.sql_examples == std::vector<std::string>{t2stest::kEventsSql});

    auto exact = plan_generation(outcome_for(RetrievalStage::normalized_match), {});
    REQUIRE(exact.mode == GenerationMode::exact_example_based);
    REQUIRE(exact.sql_examples == std::vector<std::string>{t2stest::kEventsSql});
    REQUIRE(exact.table_names() == std::vector<std::string>{"events"});

    auto strong = plan_generation(outcome_for(RetrievalStage::main_clause_match), {});
    REQUIRE(strong.mode == GenerationMode::strongly_aligned_example_based);

    auto reranked = plan_generation(outcome_for(RetrievalStage::expanded_reranked), {});
    REQUIRE(reranked.mode == GenerationMode::strongly_aligned_example_based);

    auto documentation =
        plan_generation(outcome_for(RetrievalStage::no_examples), {doc_named("events")});
    REQUIRE(documentation.mode == GenerationMode::documentation_driven);
    REQUIRE(documentation.table_names() == std::vector<std::string>{"events"});
    REQUIRE(documentation.sql_examples == std::vector<std::string>{t2stest::kRsvpSql});

    REQUIRE_THROWS_MATCHES(plan_generation(outcome_for(RetrievalStage::no_examples), {}), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.code() == ErrorCode::no_context;
                           }));
}

TEST_CASE("plan provenance names matched examples and tables") {
    auto plan = plan_generation(outcome_for(RetrievalStage::normalized_match), {});
    REQUIRE(std::count(plan.provenance.begin(), plan.provenance.end(), "example:e1") == 1);
    REQUIRE(std::count(plan.provenance.begin(), plan.provenance.end(), "table:events") == 1);
}

TEST_CASE("direct mode echoes the stored SQL with zero model calls") {
    FixtureChat chat;
    SqlGenerator generator(chat);
    auto plan = plan_generation(outcome_for(RetrievalStage::exact_match), {});
    auto result = generator.generate_sql(simple_views(), plan);
    REQUIRE(result.sql == t2stest::kEventsSql);
    REQUIRE(result.mode == GenerationMode::direct_output);
    REQUIRE(result.referenced_tables == std::set<std::string>{"events"});
    REQUIRE(chat.call_count() == 0);
}

TEST_CASE("documentation-driven generation accepts contained SQL") {
    FixtureChat chat;
    SqlGenerator generator(chat);
    GenerationPlan plan;
    plan.mode = GenerationMode::documentation_driven;
    plan.tables = {doc_named("events")};
    auto views = simple_views();
    chat.script("generate_sql_documentation_driven",
                {{"question", views.initial},
                 {"normalized", views.normalized},
                 {"tables", "events: About events. Columns: . "},
                 {"templates", ""},
                 {"violation", ""}},
                json{{"sql", "SELECT COUNT(*) FROM events"}, {"notes", "count rows"}});
    auto result = generator.generate_sql(views, plan);
    REQUIRE(result.sql == "SELECT COUNT(*) FROM events");
    REQUIRE(result.referenced_tables == std::set<std::string>{"events"});
    REQUIRE(result.notes == "count rows");
}

TEST_CASE("a corrective reprompt fixes an out-of-set table") {
    FixtureChat chat;
    SqlGenerator generator(chat);
    GenerationPlan plan;
    plan.mode = GenerationMode::documentation_driven;
    plan.tables = {doc_named("events")};
    auto views = simple_views();
    chat.script("generate_sql_documentation_driven",
                {{"question", views.initial},
                 {"normalized", views.normalized},
                 {"tables", "events: About events. Columns: . "},
                 {"templates", ""},
                 {"violation", ""}},
                json{{"sql", "SELECT * FROM unknown_t"}});
    chat.script("generate_sql_documentation_driven",
                {{"question", views.initial},
                 {"normalized", views.normalized},
                 {"tables", "events: About events. Columns: . "},
                 {"templates", ""},
                 {"violation",
                  "Previous attempt rejected: the SQL references tables outside the allowed "
                  "set: unknown_t. Correct the SQL."}},
                json{{"sql", "SELECT * FROM events"}});
    auto result = generator.generate_sql(views, plan);
    REQUIRE(result.sql == "SELECT * FROM events");
    REQUIRE(chat.call_count() == 2);
}

TEST_CASE("persistent violations raise InvalidGeneration carrying the offender") {
    FixtureChat chat;
    SqlGenerator generator(chat);
    GenerationPlan plan;
    plan.mode = GenerationMode::exact_example_based;
    plan.sql_examples = {"SELECT * FROM events"};
    plan.tables = {doc_named("events")};
    auto views = simple_views();
    json bad{{"sql", "SELECT * FROM unknown_t"}};
    chat.script("generate_sql_example_driven",
                {{"question", views.initial},
                 {"normalized", views.normalized},
                 {"examples", "SELECT * FROM events"},
                 {"tables", "events: About events. Columns: . "},
                 {"violation", ""}},
                bad);
    chat.script("generate_sql_example_driven",
                {{"question", views.initial},
                 {"normalized", views.normalized},
                 {"examples", "SELECT * FROM events"},
                 {"tables", "events: About events. Columns: . "},
                 {"violation",
                  "Previous attempt rejected: the SQL references tables outside the allowed "
                  "set: unknown_t. Correct the SQL."}},
                bad);
    try {
        generator.generate_sql(views, plan);
        FAIL("expected InvalidGeneration");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::invalid_generation);
        REQUIRE(std::string(e.what()).find("unknown_t") != std::string::npos);
    }
}

TEST_CASE("every accepted generation satisfies table containment") {
    // 100 scripted generations over random table subsets
    std::mt19937 rng(99);
    const std::vector<std::string> pool = {"events", "rsvps", "users", "groups", "orders"};
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<int> count(1, 3);

    for (int trial = 0; trial < 100; ++trial) {
        std::set<std::string> chosen;
        int n = count(rng);
        for (int i = 0; i < n; ++i) chosen.insert(pool[pick(rng)]);

        GenerationPlan plan;
        plan.mode = GenerationMode::documentation_driven;
        std::vector<std::string> digest;
        for (const auto& name : chosen) {
            plan.tables.push_back(doc_named(name));
            digest.push_back(name + ": About " + name + ". Columns: . ");
        }
        // the scripted model answers with a join over the chosen tables
        std::string sql = "SELECT COUNT(*) FROM " + *chosen.begin();
        for (auto it = std::next(chosen.begin()); it != chosen.end(); ++it)
            sql += " JOIN " + *it + " ON 1=1";

        FixtureChat chat;
        auto views = simple_views();
        chat.script("generate_sql_documentation_driven",
                    {{"question", views.initial},
                     {"normalized", views.normalized},
                     {"tables", join(digest, "\n")},
                     {"templates", ""},
                     {"violation", ""}},
                    json{{"sql", sql}});
        SqlGenerator generator(chat);
        auto result = generator.generate_sql(views, plan);
        for (const auto& table : result.referenced_tables)
            REQUIRE(chosen.count(table) == 1);
    }
}
