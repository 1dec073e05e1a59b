#pragma once

// Shared fixture data and brute-force oracles for the test suites. The
// reference corpus is one documented table (sms_statuses), one events
// question/SQL example and one two-table rsvp-count example.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/doc_pipeline.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/vector_store.hpp"

namespace t2stest {

using nlohmann::json;
using text2sql::Category;
using text2sql::EmbeddingEntry;
using text2sql::EmbeddingVector;
using text2sql::MetadataFilter;
using text2sql::SourceKind;

// ---------------------------------------------------------------------------
// Reference corpus
// ---------------------------------------------------------------------------

inline const std::string kSmsRawDoc = R"(SMS Statuses
------------
The `sms_statuses` table contains data about which activists are subscribed to the mobile messaging list of groups being mirrored (or children, if in a network) and what their current statuses are (subscribed, unsubscribed, bouncing, or spam complaint).
This table contains data about the mobile subscription status such what status the activist has currently, as well as metadata about the mobile subscription status such as when it was created.
#### Fields
| Field Name | Description | Type | Is Sort Key? |
| --- | --- | --- | --- |
| id | The numerical identifier of the mobile subscription status. | INT |  |
| subscriber_id | The numerical identifier of the activist who is attached to this status.  Relates to the `id` field in the `[users](/mirroring/docs/users)` table. | INT | True |
| group_id | The numerical identifier of the group who's list this mobile subscription status is related to.  Relates to the `id` field in the `[groups](/mirroring/docs/groups)` table. | INT |  |
| user_id | This field is intentionally blank. | INT |  |
| status | The mobile subscription status of the activist. `1` if subscribed. `2` if unsubscribed. `3` if bouncing. | INT |  |
| source_action_id | This field is intentionally blank. | INT |  |
| source_action_type | This field is intentionally blank. | VARCHAR |  |
| join_date | The UTC timestamp when this mobile subscription status was last changed from any status (or none) to subscribed. Ex: The date the person last joined the list. | DATETIME |  |
| created_at | The UTC timestamp when this mobile subscription status was created. | DATETIME |  |
| updated_at | The UTC timestamp when this mobile subscription status was last updated. | DATETIME |  |
)";

inline json sms_structured_payload() {
    json columns = json::array();
    auto col = [&](const char* name, const char* description) {
        columns.push_back({{"column", name}, {"description", description}});
    };
    col("id", "The numerical identifier of the mobile subscription status.");
    col("subscriber_id",
        "The numerical identifier of the activist who is attached to this status. Relates to "
        "the `id` field in the `users` table.");
    col("group_id",
        "The numerical identifier of the group who's list this mobile subscription status is "
        "related to. Relates to the `id` field in the `groups` table.");
    col("user_id", "This field is intentionally blank.");
    col("status",
        "The mobile subscription status of the activist. `1` if subscribed. `2` if "
        "unsubscribed. `3` if bouncing.");
    col("source_action_id", "This field is intentionally blank.");
    col("source_action_type", "This field is intentionally blank.");
    col("join_date",
        "The UTC timestamp when this mobile subscription status was last changed from any "
        "status (or none) to subscribed. Ex: The date the person last joined the list.");
    col("created_at", "The UTC timestamp when this mobile subscription status was created.");
    col("updated_at", "The UTC timestamp when this mobile subscription status was last updated.");
    return json{
        {"name", "sms_statuses"},
        {"summary", "Data about the mobile subscription statuses of activists within groups."},
        {"purpose",
         "To track and manage the subscription statuses (subscribed, unsubscribed, bouncing, or "
         "spam complaint) of activists in mobile messaging lists."},
        {"dependencies_thoughts",
         "Relates to the `users` table (subscriber_id to id) and the `groups` table (group_id to "
         "id)."},
        {"keys", json::array({"subscriber_id", "group_id"})},
        {"connected_tables", json::array({"users", "groups"})},
        {"columns", columns}};
}

inline const std::string kEventsQuestion =
    "Show me a list of events in the past month including name, permalink, start date, end "
    "date, and RSVP count";

inline const std::string kEventsSql =
    "SELECT title AS name, permalink, start_at AS start_date,\n"
    "       end_at AS end_date, rsvp_count\n"
    "FROM events\n"
    "WHERE\n"
    "  start_at >= DATEADD(month, -1, GETDATE())\n"
    "  AND start_at < GETDATE();";

inline const std::string kEventsNormalized =
    "Retrieve a list of events over a defined timeframe including their name, permalink, "
    "start date, end date, and RSVP count";

inline const std::string kEventsMainClause = "list of events in the past month";

inline const std::vector<std::string> kEventsVariations = {
    "Provide a list of events occurring within a specified time range, including their names, "
    "permalinks, start dates, end dates, and the number of RSVPs.",
    "Can you give me the details of events within a certain period, listing their name, "
    "permalink, start date, end date, and RSVP count?",
    "Generate a report of events within a certain period, showing their name, permalink, "
    "start date, end date, and number of RSVPs"};

inline json events_extraction_payload() {
    return json{
        {"normalized", kEventsNormalized},
        {"entities", json::array({json{{"label", "list of events with their characteristics"},
                                       {"kind", "category"},
                                       {"attributes", json::object()}}})},
        {"data_sources",
         json::array({json{{"table", "events"},
                           {"columns", json::array({"title", "permalink", "start_at", "end_at",
                                                    "rsvp_count"})}}})},
        {"operations", json::array({json{{"operation", "filter"},
                                         {"target", "start_at"},
                                         {"condition", "within the last month"}}})}};
}

inline json events_split_payload() {
    return json{{"main_clause", kEventsMainClause},
                {"details", "including name, permalink, start date, end date, and RSVP count"}};
}

inline json events_variations_payload() {
    return json{{"variations", kEventsVariations}};
}

inline const std::string kRsvpQuestion =
    "How many people RSVP'd to the climate march event last month?";

inline const std::string kRsvpSql =
    "SELECT COUNT(rsvps.id)\n"
    "FROM rsvps\n"
    "JOIN events ON rsvps.event_id = events.id\n"
    "WHERE events.name LIKE '%climate march%'\n"
    "AND events.start_date BETWEEN DATE_SUB(CURDATE(), INTERVAL 2 MONTH)\n"
    "AND DATE_SUB(CURDATE(), INTERVAL 1 MONTH)";

// ---------------------------------------------------------------------------
// Test doubles
// ---------------------------------------------------------------------------

// Embedder returning hand-placed vectors for known texts, falling back to the
// hashed offline embedder for everything else.
class FakeEmbedder : public text2sql::Embedder {
public:
    explicit FakeEmbedder(std::size_t dimension = 8) : dim_(dimension), fallback_(dimension) {}

    void place(const std::string& text, std::vector<double> values) {
        vectors_[text] = EmbeddingVector::of(std::move(values));
    }

    std::size_t dimension() const override { return dim_; }

protected:
    EmbeddingVector do_embed(const std::string& text) override {
        auto it = vectors_.find(text);
        if (it != vectors_.end()) return it->second;
        return fallback_.embed(text);
    }

private:
    std::size_t dim_;
    text2sql::OfflineEmbedder fallback_;
    std::map<std::string, EmbeddingVector> vectors_;
};

// Unit vector at angle theta in the plane of axes (a, b); similarities
// between two such vectors are exactly (cos(theta1 - theta2) + 1) / 2.
inline EmbeddingVector planar_vector(std::size_t dimension, double theta, std::size_t a = 0,
                                     std::size_t b = 1) {
    std::vector<double> values(dimension, 0.0);
    values[a] = std::cos(theta);
    values[b] = std::sin(theta);
    return EmbeddingVector::of(std::move(values));
}

inline EmbeddingVector random_vector(std::mt19937& rng, std::size_t dimension) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(dimension);
    double norm = 0.0;
    while (norm == 0.0) {
        for (auto& v : values) v = normal(rng);
        norm = 0.0;
        for (double v : values) norm += v * v;
    }
    return EmbeddingVector::of(std::move(values));
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// Exhaustive-scan top-n with the same ordering contract as the store.
inline std::vector<std::pair<std::string, double>> oracle_top_n(
    const std::vector<EmbeddingEntry>& entries, const EmbeddingVector& query,
    const MetadataFilter& filter, std::size_t n) {
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& e : entries) {
        if (!filter.accepts(e)) continue;
        scored.emplace_back(e.id, text2sql::similarity(query, e.vector));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > n) scored.resize(n);
    return scored;
}

// Sort-and-index nearest-rank percentile.
inline double oracle_percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    std::size_t rank = p == 0.0
                           ? 1
                           : static_cast<std::size_t>(
                                 std::ceil(p / 100.0 * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return values[rank - 1];
}

// ---------------------------------------------------------------------------
// Fixture files for engine-level (offline) runs
// ---------------------------------------------------------------------------

inline void write_fixture_file(const std::filesystem::path& fixtures_dir,
                               const std::string& template_id,
                               const std::map<std::string, std::string>& slots,
                               const json& payload_or_sequence) {
    auto dir = fixtures_dir / template_id;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / (text2sql::FixtureChat::fingerprint(slots) + ".json"));
    out << payload_or_sequence.dump(2) << "\n";
}

inline const std::string kParaphraseQuestion =
    "Could you show events from the previous month with their details?";

// Everything an offline engine needs to ingest the reference corpus and
// answer the exact question plus one paraphrase (vote count 3).
inline void write_reference_fixtures(const std::filesystem::path& fixtures_dir) {
    using text2sql::TableDocument;

    write_fixture_file(fixtures_dir, "structure_document", {{"raw_text", kSmsRawDoc}},
                       sms_structured_payload());

    TableDocument doc = TableDocument::from_json(sms_structured_payload());
    doc.raw_text = kSmsRawDoc;
    json votes = json::array(
        {json{{"entities", json::array({"mobile subscription", "activist engagement"})}},
         json{{"entities", json::array({"mobile subscription"})}},
         json{{"entities", json::array({"mobile subscription", "activist engagement"})}}});
    write_fixture_file(fixtures_dir, "extract_entities", {{"document", doc.to_json().dump(2)}},
                       votes);

    write_fixture_file(fixtures_dir, "normalize_and_extract",
                       {{"question", kEventsQuestion}, {"sql", kEventsSql}},
                       events_extraction_payload());
    write_fixture_file(fixtures_dir, "split_main_clause", {{"question", kEventsQuestion}},
                       events_split_payload());
    write_fixture_file(fixtures_dir, "generate_variations",
                       {{"normalized", kEventsNormalized}, {"sql", kEventsSql}, {"count", "3"}},
                       events_variations_payload());

    // ask-time views for the exact question (no SQL available)
    write_fixture_file(fixtures_dir, "normalize_and_extract",
                       {{"question", kEventsQuestion}, {"sql", ""}},
                       events_extraction_payload());

    // the paraphrase normalizes to the stored normalized text (stage II)
    json paraphrase_extraction = events_extraction_payload();
    write_fixture_file(fixtures_dir, "normalize_and_extract",
                       {{"question", kParaphraseQuestion}, {"sql", ""}}, paraphrase_extraction);
    write_fixture_file(fixtures_dir, "split_main_clause", {{"question", kParaphraseQuestion}},
                       json{{"main_clause", "events from the previous month"},
                            {"details", "with their details"}});
    write_fixture_file(fixtures_dir, "generate_sql_example_driven",
                       {{"question", kParaphraseQuestion},
                        {"normalized", kEventsNormalized},
                        {"examples", kEventsSql},
                        {"tables", "events:  Columns: . "},
                        {"violation", ""}},
                       json{{"sql", kEventsSql}, {"notes", "reused the stored reference"}});
}

// Pair-enumeration Rand index over binary membership partitions.
inline double oracle_rand_index(const std::set<std::string>& a, const std::set<std::string>& b,
                                const std::set<std::string>& universe) {
    std::vector<std::string> u(universe.begin(), universe.end());
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            bool ta = (a.count(u[i]) > 0) == (a.count(u[j]) > 0);
            bool tb = (b.count(u[i]) > 0) == (b.count(u[j]) > 0);
            ++total;
            if (ta == tb) ++agree;
        }
    }
    return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace t2stest
