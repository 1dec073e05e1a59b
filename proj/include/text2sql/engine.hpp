#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "text2sql/calibration.hpp"
#include "text2sql/catalog.hpp"
#include "text2sql/doc_pipeline.hpp"
#include "text2sql/domain_instructions.hpp"
#include "text2sql/errors.hpp"
#include "text2sql/example_pipeline.hpp"
#include "text2sql/providers.hpp"
#include "text2sql/retrieval.hpp"
#include "text2sql/sqlgen.hpp"
#include "text2sql/vector_store.hpp"

namespace text2sql {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct EngineConfig {
    std::filesystem::path kb_path;
    bool offline = true;  // forces the deterministic providers
    std::size_t dimension = 384;
    int vote_count = 5;
    int variation_count = 3;
    std::size_t per_query_limit = 10;
    ThresholdOverrides overrides;
    std::filesystem::path fixtures_dir;  // empty -> <kb>/fixtures
    std::optional<HttpProviderConfig> llm;
    std::optional<HttpProviderConfig> embedder;
    std::optional<HttpProviderConfig> reranker;

    void validate() const {
        if (kb_path.empty()) raise(ErrorCode::invalid_input, "kb_path is not set");
        if (dimension == 0 || vote_count < 1 || variation_count < 1 || per_query_limit < 1)
            raise(ErrorCode::invalid_input, "numeric config fields must be positive");
    }

    static EngineConfig from_json(const json& j, const std::filesystem::path& base_dir) {
        EngineConfig config;
        if (j.contains("kb_path")) {
            std::filesystem::path p = j["kb_path"].get<std::string>();
            config.kb_path = p.is_absolute() ? p : base_dir / p;
        }
        config.offline = j.value("offline", config.offline);
        config.dimension = j.value("dimension", config.dimension);
        config.vote_count = j.value("vote_count", config.vote_count);
        config.variation_count = j.value("variation_count", config.variation_count);
        config.per_query_limit = j.value("per_query_limit", config.per_query_limit);
        if (j.contains("fixtures_dir")) {
            std::filesystem::path p = j["fixtures_dir"].get<std::string>();
            config.fixtures_dir = p.is_absolute() ? p : base_dir / p;
        }
        if (j.contains("thresholds")) {
            const json& t = j["thresholds"];
            if (t.contains("tau_exact")) config.overrides.tau_exact = t["tau_exact"].get<double>();
            if (t.contains("t_stage2")) config.overrides.t_stage2 = t["t_stage2"].get<double>();
            if (t.contains("t_stage3")) config.overrides.t_stage3 = t["t_stage3"].get<double>();
            if (t.contains("t_stage4")) config.overrides.t_stage4 = t["t_stage4"].get<double>();
            if (t.contains("tau_rerank"))
                config.overrides.tau_rerank = t["tau_rerank"].get<double>();
        }
        auto parse_provider = [](const json& p) {
            HttpProviderConfig c;
            c.url = p.value("url", "");
            c.model = p.value("model", "");
            c.api_key_env = p.value("api_key_env", "");
            c.max_retries = p.value("max_retries", c.max_retries);
            c.backoff_ms = p.value("backoff_ms", c.backoff_ms);
            return c;
        };
        if (j.contains("providers")) {
            const json& p = j["providers"];
            if (p.contains("llm")) config.llm = parse_provider(p["llm"]);
            if (p.contains("embedder")) config.embedder = parse_provider(p["embedder"]);
            if (p.contains("reranker")) config.reranker = parse_provider(p["reranker"]);
        }
        return config;
    }

    static EngineConfig load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) raise(ErrorCode::io_error, "cannot read config " + path.string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            raise(ErrorCode::io_error, "bad config " + path.string() + ": " + e.what());
        }
        return from_json(j, path.parent_path());
    }
};

// ---------------------------------------------------------------------------
// KB directory lock: one command at a time
// ---------------------------------------------------------------------------

class KbLock {
public:
    explicit KbLock(const std::filesystem::path& kb_path)
        : path_(kb_path / ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            raise(ErrorCode::io_error,
                  "knowledge base is locked by another command (" + path_.string() + ")");
    }

    KbLock(const KbLock&) = delete;
    KbLock& operator=(const KbLock&) = delete;

    ~KbLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Ingest summaries and ask results
// ---------------------------------------------------------------------------

struct IngestSummary {
    std::size_t documents = 0;
    std::size_t examples = 0;
    std::size_t entries = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (unit, error)
    std::vector<std::string> warnings;

    json to_json() const {
        json fails = json::array();
        for (const auto& [unit, error] : failures)
            fails.push_back({{"unit", unit}, {"error", error}});
        return json{{"documents", documents},
                    {"examples", examples},
                    {"entries", entries},
                    {"failures", fails},
                    {"warnings", warnings}};
    }
};

struct AskResult {
    std::string sql;
    GenerationMode mode = GenerationMode::direct_output;
    RetrievalStage stage = RetrievalStage::no_examples;
    std::vector<std::string> provenance;
    std::string notes;
    json trace;

    json to_json() const {
        return json{{"sql", sql},
                    {"mode", std::string(mode_name(mode))},
                    {"stage", std::string(stage_name(stage))},
                    {"provenance", provenance},
                    {"notes", notes}};
    }
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class Engine {
public:
    explicit Engine(EngineConfig config) : config_(std::move(config)) {
        config_.validate();
        std::filesystem::create_directories(config_.kb_path);
        lock_ = std::make_unique<KbLock>(config_.kb_path);
        build_providers();
        load_state();
        example_pipeline_ = std::make_unique<ExamplePipeline>(*chat_, *embedder_, *store_,
                                                              config_.variation_count);
        doc_pipeline_ = std::make_unique<DocPipeline>(*chat_, *embedder_, *store_);
        domain_pipeline_ = std::make_unique<DomainInstructionPipeline>(*chat_);
        retriever_ = std::make_unique<Retriever>(*store_, *embedder_, *chat_, *reranker_,
                                                 *example_pipeline_, documents_, examples_,
                                                 config_.per_query_limit);
    }

    const EngineConfig& config() const { return config_; }
    VectorStore& store() { return *store_; }
    const DocumentCatalog& documents() const { return documents_; }
    const ExampleCatalog& examples() const { return examples_; }
    const ThresholdProfile& profile() const { return profile_; }
    ChatProvider& chat() { return *chat_; }
    Embedder& embedder() { return *embedder_; }
    Retriever& retriever() { return *retriever_; }

    // Only meaningful in offline mode, where the chat provider is scripted.
    FixtureChat* fixtures() { return dynamic_cast<FixtureChat*>(chat_.get()); }

    // -----------------------------------------------------------------------
    // Training commands
    // -----------------------------------------------------------------------

    IngestSummary train_docs(const std::filesystem::path& dir) {
        namespace fs = std::filesystem;
        if (!fs::exists(dir) || !fs::is_directory(dir))
            raise(ErrorCode::io_error, dir.string() + " is not a readable directory");
        IngestSummary summary;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            try {
                std::ifstream in(file);
                std::string text((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
                if (trim(text).empty()) continue;
                summary.entries += ingest_document_text(text);
                summary.documents += 1;
                save_state();
            } catch (const std::exception& e) {
                summary.failures.emplace_back(file.filename().string(), e.what());
            }
        }
        return summary;
    }

    IngestSummary train_examples(const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) raise(ErrorCode::io_error, "cannot read " + file.string());
        IngestSummary summary;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            std::string unit = file.filename().string() + ":" + std::to_string(line_no);
            try {
                json j = json::parse(line);
                std::string question = j.at("question").get<std::string>();
                std::optional<std::string> sql;
                if (j.contains("sql") && j["sql"].is_string() &&
                    !trim(j["sql"].get<std::string>()).empty())
                    sql = j["sql"].get<std::string>();
                std::string id = j.value("id", "q" + to_hex(fnv1a64(question)));
                ExampleRecord record = example_pipeline_->build_record(id, question, sql);
                auto entries = example_pipeline_->train_example(record);
                examples_.put(record);
                summary.examples += 1;
                summary.entries += entries.size();
                derive_domain_instructions(record, summary);
                save_state();
            } catch (const std::exception& e) {
                summary.failures.emplace_back(unit, e.what());
            }
        }
        return summary;
    }

    IngestSummary train_schema(const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) raise(ErrorCode::io_error, "cannot read " + file.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        IngestSummary summary;
        for (const auto& schema : parse_schemas(text, summary)) {
            try {
                std::string description = doc_pipeline_->generate_document_from_schema(schema);
                summary.entries += ingest_document_text(description);
                summary.documents += 1;
                save_state();
            } catch (const std::exception& e) {
                summary.failures.emplace_back(schema.table, e.what());
            }
        }
        return summary;
    }

    // -----------------------------------------------------------------------
    // Calibration
    // -----------------------------------------------------------------------

    ThresholdProfile run_calibration() {
        std::map<std::string, VectorGroup> by_example;
        for (const auto& entry : store_->all()) {
            if (entry.source_kind != SourceKind::example) continue;
            auto& group = by_example[entry.ref_id];
            group.group_id = entry.ref_id;
            group.members.push_back({entry.category, entry.vector});
        }
        std::vector<VectorGroup> groups;
        for (auto& [_, group] : by_example) groups.push_back(std::move(group));

        json report;
        if (groups.size() < 2) {
            profile_ = default_profile();
            apply_overrides(profile_);
            profile_.provenance = "default";
            report["reason"] = "fewer than two example groups; using defaults";
        } else {
            SimilarityStats stats = pairwise_similarities(groups);
            profile_ = calibrate(stats, config_.overrides);
            report["distributions"] = summarize(stats);
        }
        profile_.calibrated_at = timestamp();
        report["profile"] = profile_.to_json();
        report["overlap"] = overlap_reports();
        write_json(config_.kb_path / "profile.json", profile_.to_json());
        write_json(config_.kb_path / "calibration_report.json", report);
        return profile_;
    }

    // -----------------------------------------------------------------------
    // Question answering
    // -----------------------------------------------------------------------

    AskResult ask(const std::string& question, bool explain = false) {
        if (store_->size() == 0 && documents_.size() == 0)
            raise(ErrorCode::no_context, "no examples and no tables retrieved");
        json trace;
        trace["question"] = question;
        trace["profile"] = profile_.to_json();

        QuestionViews views = retriever_->derive_views(question);
        trace["views"] = {{"initial", views.initial},
                          {"normalized", views.normalized},
                          {"main_clause", views.main_clause},
                          {"concepts", views.concepts}};

        RetrievalOutcome outcome = retriever_->retrieve_examples(views, profile_, &trace);

        std::vector<TableDocument> refined;
        if (outcome.stage == RetrievalStage::no_examples) {
            TableCandidates candidates = gather_table_candidates(views, outcome, &trace);
            refined = candidates.refined;
        }

        GenerationPlan plan = plan_generation(outcome, refined);
        SqlGenerator generator(*chat_);
        GeneratedSql generated = generator.generate_sql(views, plan);

        AskResult result;
        result.sql = generated.sql;
        result.mode = generated.mode;
        result.stage = outcome.stage;
        result.provenance = plan.provenance;
        result.notes = generated.notes;
        trace["mode"] = std::string(mode_name(generated.mode));
        trace["sql"] = generated.sql;
        result.trace = trace;
        if (explain) append_trace(trace);
        return result;
    }

    // Candidate assembly for the documentation-driven path:
    // detected (content similarity) + rule-based, refined by the LLM; when
    // refinement rejects everything the candidates stand unchanged.
    TableCandidates gather_table_candidates(const QuestionViews& views,
                                            const RetrievalOutcome& outcome, json* trace) {
        TableCandidates candidates;
        candidates.detected = retriever_->retrieve_documents(views, config_.per_query_limit, trace);
        candidates.rule_based = retriever_->select_tables_by_rules(views.normalized, rules_, trace);

        std::set<std::string> seen;
        auto add_to_total = [&](const std::vector<TableDocument>& docs) {
            for (const auto& doc : docs)
                if (seen.insert(doc.name).second) candidates.total.push_back(doc);
        };
        add_to_total(candidates.detected);
        add_to_total(candidates.rule_based);

        std::vector<TableDocument> pool = candidates.total;
        for (const auto& doc : outcome.tables_from_examples)
            if (seen.insert(doc.name).second) pool.push_back(doc);

        if (pool.empty()) {
            candidates.refined = {};
            return candidates;
        }
        try {
            candidates.refined = retriever_->refine_tables(views, instructions_, rules_, pool, trace);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::refinement_empty) throw;
            if (trace) (*trace)["warnings"].push_back("refinement empty; keeping candidates");
            candidates.refined = pool;
        }
        return candidates;
    }

    std::optional<TableDocument> inspect(const std::string& table) const {
        return documents_.get(table);
    }

    std::vector<std::string> rules() const { return rules_; }

    void save_state() {
        store_->persist(config_.kb_path / "embeddings.jsonl");
        documents_.save(config_.kb_path / "documents.jsonl");
        examples_.save(config_.kb_path / "examples.jsonl");
        if (!instructions_.mappings.empty()) {
            json mappings = json::array();
            for (const auto& m : instructions_.mappings) mappings.push_back(m.to_json());
            write_json(config_.kb_path / "instructions.json", {{"mappings", mappings}});
            std::ofstream out(config_.kb_path / "instructions.txt", std::ios::trunc);
            out << instructions_.text;
        }
    }

private:
    std::size_t ingest_document_text(const std::string& text) {
        TableDocument doc = doc_pipeline_->structure_document(text);
        auto [entities, strong] = doc_pipeline_->extract_entities(doc, config_.vote_count);
        doc.entities = entities;
        doc.strong_entities = strong;
        auto entries = doc_pipeline_->train_document(doc);
        documents_.put(doc);
        return entries.size();
    }

    // Domain-specific mappings are a best-effort by-product of example
    // ingestion: no SQL, no document catalog or no scripted responses just
    // leave a note.
    void derive_domain_instructions(const ExampleRecord& record, IngestSummary& summary) {
        if (!record.sql || documents_.size() == 0) return;
        try {
            auto selection = domain_pipeline_->select_tables_with_justification(
                record, documents_.all(), rules_);
            auto classified =
                domain_pipeline_->classify_entities(selection.selections, class_rules_);
            for (auto& w : selection.warnings) summary.warnings.push_back(record.id + ": " + w);
            for (auto& w : classified.warnings) summary.warnings.push_back(record.id + ": " + w);
            std::vector<DomainEntityMapping> merged = instructions_.mappings;
            for (auto& m : classified.mappings) {
                m.example_ids.push_back(record.id);
                merged.push_back(std::move(m));
            }
            instructions_ = synthesize_instructions(std::move(merged));
        } catch (const Error& e) {
            summary.warnings.push_back(record.id + ": domain mapping skipped (" +
                                       std::string(e.what()) + ")");
        }
    }

    void build_providers() {
        const bool use_remote = !config_.offline;
        if (use_remote && config_.llm) {
#ifdef TEXT2SQL_ENABLE_HTTP
            chat_ = std::make_unique<HttpChatProvider>(*config_.llm);
#else
            raise(ErrorCode::provider_unavailable, "built without HTTP provider support");
#endif
        } else {
            auto fixture_chat = std::make_unique<FixtureChat>();
            auto dir = config_.fixtures_dir.empty() ? config_.kb_path / "fixtures"
                                                    : config_.fixtures_dir;
            fixture_chat->load_directory(dir);
            chat_ = std::move(fixture_chat);
        }
        if (use_remote && config_.embedder) {
#ifdef TEXT2SQL_ENABLE_HTTP
            embedder_ = std::make_unique<HttpEmbedder>(*config_.embedder, config_.dimension);
#else
            raise(ErrorCode::provider_unavailable, "built without HTTP provider support");
#endif
        } else {
            embedder_ = std::make_unique<OfflineEmbedder>(config_.dimension);
        }
        if (use_remote && config_.reranker) {
#ifdef TEXT2SQL_ENABLE_HTTP
            reranker_ = std::make_unique<HttpReranker>(*config_.reranker);
#else
            raise(ErrorCode::provider_unavailable, "built without HTTP provider support");
#endif
        } else {
            reranker_ = std::make_unique<JaccardReranker>();
        }
    }

    void load_state() {
        namespace fs = std::filesystem;
        const auto store_path = config_.kb_path / "embeddings.jsonl";
        if (fs::exists(store_path))
            store_ = std::make_unique<VectorStore>(VectorStore::load(store_path, config_.dimension));
        else
            store_ = std::make_unique<VectorStore>(config_.dimension);
        documents_ = DocumentCatalog::load(config_.kb_path / "documents.jsonl");
        examples_ = ExampleCatalog::load(config_.kb_path / "examples.jsonl");

        const auto profile_path = config_.kb_path / "profile.json";
        if (fs::exists(profile_path)) {
            std::ifstream in(profile_path);
            json j;
            in >> j;
            profile_ = ThresholdProfile::from_json(j);
        } else {
            profile_ = default_profile();
            apply_overrides(profile_);
        }

        const auto instructions_path = config_.kb_path / "instructions.json";
        if (fs::exists(instructions_path)) {
            std::ifstream in(instructions_path);
            json j;
            in >> j;
            std::vector<DomainEntityMapping> mappings;
            for (const auto& m : j.value("mappings", json::array()))
                mappings.push_back(DomainEntityMapping::from_json(m));
            instructions_ = synthesize_instructions(std::move(mappings));
        }

        rules_ = read_lines(config_.kb_path / "rules.txt");
        const auto class_rules_path = config_.kb_path / "classification_rules.txt";
        if (fs::exists(class_rules_path)) {
            std::ifstream in(class_rules_path);
            class_rules_.assign((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        } else {
            class_rules_ = std::string(kDefaultClassRules);
        }
    }

    void apply_overrides(ThresholdProfile& profile) const {
        const auto& o = config_.overrides;
        if (o.tau_exact) profile.tau_exact = *o.tau_exact;
        if (o.t_stage2) profile.t_stage2 = *o.t_stage2;
        if (o.t_stage3) profile.t_stage3 = *o.t_stage3;
        if (o.t_stage4) profile.t_stage4 = *o.t_stage4;
        if (o.tau_rerank) profile.tau_rerank = *o.tau_rerank;
        profile.validate();
    }

    static std::vector<std::string> read_lines(const std::filesystem::path& path) {
        std::vector<std::string> lines;
        if (!std::filesystem::exists(path)) return lines;
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (!line.empty() && line[0] != '#') lines.push_back(line);
        }
        return lines;
    }

    static void write_json(const std::filesystem::path& path, const json& j) {
        std::ofstream out(path, std::ios::trunc);
        if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
        out << j.dump(2) << "\n";
    }

    void append_trace(const json& trace) {
        std::ofstream out(config_.kb_path / "traces.jsonl", std::ios::app);
        if (!out) raise(ErrorCode::io_error, "cannot write trace file");
        out << trace.dump() << "\n";
    }

    static std::string timestamp() {
        auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    static json summarize_list(const std::vector<double>& values) {
        if (values.empty()) return json{{"count", 0}};
        json out{{"count", values.size()}};
        for (double p : {1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0})
            out["p" + std::to_string(static_cast<int>(p))] = percentile(values, p);
        return out;
    }

    static json summarize(const SimilarityStats& stats) {
        auto scope = [](const ScopeStats& s) {
            return json{{"intra_nn", summarize_list(s.intra_nn)},
                        {"inter_nn", summarize_list(s.inter_nn)},
                        {"intra_full", summarize_list(s.intra_full)},
                        {"inter_full", summarize_list(s.inter_full)}};
        };
        return json{{"normalized", scope(stats.normalized)},
                    {"norm_main", scope(stats.norm_main)},
                    {"full", scope(stats.full)}};
    }

    json overlap_reports() {
        json reports = json::array();
        std::set<std::string> universe;
        for (const auto& name : documents_.names()) universe.insert(name);
        for (const auto& record : examples_.all()) {
            QuestionViews views;
            views.initial = record.initial_question;
            views.normalized = record.normalized;
            views.main_clause = record.main_clause;
            for (const auto& e : record.entities) views.concepts.push_back(e.label);
            if (views.normalized.empty()) continue;
            auto sets = retriever_->document_query_sets(views, config_.per_query_limit);
            OverlapReport report = make_overlap_report(sets, universe);
            reports.push_back({{"example", record.id}, {"report", report.to_json()}});
        }
        return reports;
    }

    // schema input: JSONL records or CREATE TABLE statements
    std::vector<TableSchema> parse_schemas(const std::string& text, IngestSummary& summary) {
        std::vector<TableSchema> schemas;
        std::string trimmed = trim(text);
        if (trimmed.empty()) return schemas;
        if (trimmed.front() == '{') {
            std::istringstream stream(text);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(stream, line)) {
                ++line_no;
                if (trim(line).empty()) continue;
                try {
                    json j = json::parse(line);
                    TableSchema schema;
                    schema.table = j.at("table").get<std::string>();
                    for (const auto& c : j.at("columns"))
                        schema.columns.push_back({c.at("name").get<std::string>(),
                                                  c.value("type", "TEXT"), c.value("key", false)});
                    schema.validate();
                    schemas.push_back(std::move(schema));
                } catch (const std::exception& e) {
                    summary.failures.emplace_back("line " + std::to_string(line_no), e.what());
                }
            }
            return schemas;
        }
        return parse_ddl(text, summary);
    }

    static std::vector<TableSchema> parse_ddl(const std::string& ddl, IngestSummary& summary) {
        std::vector<TableSchema> schemas;
        std::string lower = casefold(ddl);
        std::size_t pos = 0;
        while ((pos = lower.find("create table", pos)) != std::string::npos) {
            std::size_t name_start = pos + std::string("create table").size();
            std::size_t paren = lower.find('(', name_start);
            if (paren == std::string::npos) break;
            TableSchema schema;
            schema.table = trim(ddl.substr(name_start, paren - name_start));
            // strip IF NOT EXISTS and quoting
            if (casefold(schema.table).rfind("if not exists", 0) == 0)
                schema.table = trim(schema.table.substr(std::string("if not exists").size()));
            std::erase_if(schema.table, [](char c) { return c == '`' || c == '"'; });

            int depth = 1;
            std::size_t body_start = paren + 1, i = body_start;
            for (; i < ddl.size() && depth > 0; ++i) {
                if (ddl[i] == '(') ++depth;
                if (ddl[i] == ')') --depth;
            }
            std::string body = ddl.substr(body_start, i - body_start - 1);
            std::vector<std::string> parts;
            std::string current;
            int inner = 0;
            for (char c : body) {
                if (c == '(') ++inner;
                if (c == ')') --inner;
                if (c == ',' && inner == 0) {
                    parts.push_back(current);
                    current.clear();
                } else {
                    current.push_back(c);
                }
            }
            if (!trim(current).empty()) parts.push_back(current);

            std::set<std::string> primary_keys;
            for (const auto& part : parts) {
                std::string p = trim(part);
                std::string pl = casefold(p);
                if (pl.rfind("primary key", 0) == 0 || pl.rfind("foreign key", 0) == 0 ||
                    pl.rfind("constraint", 0) == 0 || pl.rfind("unique", 0) == 0 ||
                    pl.rfind("key ", 0) == 0) {
                    auto open = p.find('(');
                    auto close = p.find(')', open);
                    if (pl.rfind("primary key", 0) == 0 && open != std::string::npos &&
                        close != std::string::npos) {
                        for (auto& k : tokenize(p.substr(open + 1, close - open - 1)))
                            primary_keys.insert(k);
                    }
                    continue;
                }
                auto tokens = tokenize(p);
                if (tokens.empty()) continue;
                SchemaColumn column;
                column.name = tokens[0];
                column.type = tokens.size() > 1 ? tokens[1] : "text";
                if (pl.find("primary key") != std::string::npos) column.key = true;
                schema.columns.push_back(std::move(column));
            }
            for (auto& c : schema.columns)
                if (primary_keys.count(c.name)) c.key = true;
            try {
                schema.validate();
                schemas.push_back(std::move(schema));
            } catch (const std::exception& e) {
                summary.failures.emplace_back(schema.table, e.what());
            }
            pos = i;
        }
        return schemas;
    }

    EngineConfig config_;
    std::unique_ptr<KbLock> lock_;
    std::unique_ptr<ChatProvider> chat_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<Reranker> reranker_;
    std::unique_ptr<VectorStore> store_;
    DocumentCatalog documents_;
    ExampleCatalog examples_;
    ThresholdProfile profile_;
    DomainInstruction instructions_;
    std::vector<std::string> rules_;
    std::string class_rules_;
    std::unique_ptr<ExamplePipeline> example_pipeline_;
    std::unique_ptr<DocPipeline> doc_pipeline_;
    std::unique_ptr<DomainInstructionPipeline> domain_pipeline_;
    std::unique_ptr<Retriever> retriever_;
};

}  // namespace text2sql
