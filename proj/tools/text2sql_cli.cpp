// Command-line front end: trains a knowledge base from documentation, schemas
// and question/SQL examples, calibrates the retrieval thresholds and answers
// questions with SQL.

#define TEXT2SQL_ENABLE_HTTP

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "text2sql/engine.hpp"

namespace {

using text2sql::Engine;
using text2sql::EngineConfig;
using text2sql::Error;
using text2sql::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoContext = 2;
constexpr int kExitProvider = 3;

EngineConfig resolve_config(const std::string& config_flag, const std::string& kb_flag,
                            bool offline_flag) {
    EngineConfig config;
    std::string config_path = config_flag;
    if (config_path.empty()) {
        if (const char* env = std::getenv("TEXT2SQL_CONFIG")) config_path = env;
    }
    if (!config_path.empty()) {
        config = EngineConfig::load_file(config_path);
    } else if (!kb_flag.empty() &&
               std::filesystem::exists(std::filesystem::path(kb_flag) / "config.json")) {
        config = EngineConfig::load_file(std::filesystem::path(kb_flag) / "config.json");
    }
    if (!kb_flag.empty()) config.kb_path = kb_flag;
    if (config.kb_path.empty()) config.kb_path = "kb";
    if (offline_flag) config.offline = true;
    return config;
}

void print_summary(const text2sql::IngestSummary& summary) {
    std::cout << summary.to_json().dump(2) << "\n";
}

int map_error(const Error& e) {
    std::cerr << e.what() << "\n";
    switch (e.code()) {
        case ErrorCode::no_context: return kExitNoContext;
        case ErrorCode::provider_unavailable:
        case ErrorCode::missing_fixture: return kExitProvider;
        default: return kExitError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented Text-to-SQL engine"};
    app.require_subcommand(1);

    std::string config_path, kb_path;
    bool offline = false;
    app.add_option("--config", config_path, "Path to a JSON config file");
    app.add_option("--kb", kb_path, "Knowledge-base directory");
    app.add_flag("--offline", offline, "Force the deterministic offline providers");

    std::string docs_dir;
    auto* train_docs = app.add_subcommand("train-docs", "Ingest a directory of table docs");
    train_docs->add_option("dir", docs_dir, "Directory of free-text files")->required();

    std::string examples_file;
    auto* train_examples =
        app.add_subcommand("train-examples", "Ingest a JSONL file of question/SQL pairs");
    train_examples->add_option("file", examples_file, "Record file")->required();

    std::string schema_file;
    auto* train_schema =
        app.add_subcommand("train-schema", "Ingest a schema record file or DDL text");
    train_schema->add_option("file", schema_file, "Schema file")->required();

    auto* calibrate = app.add_subcommand("calibrate", "Derive the retrieval thresholds");

    std::string question;
    bool explain = false, as_json = false;
    auto* ask = app.add_subcommand("ask", "Answer a natural-language question with SQL");
    ask->add_option("question", question, "The question")->required();
    ask->add_flag("--explain", explain, "Append a retrieval trace to traces.jsonl");
    ask->add_flag("--json", as_json, "Print the full result record as JSON");

    std::string table;
    auto* inspect = app.add_subcommand("inspect", "Show a trained table document");
    inspect->add_option("table", table, "Table name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        Engine engine(resolve_config(config_path, kb_path, offline));

        if (train_docs->parsed()) {
            print_summary(engine.train_docs(docs_dir));
            engine.save_state();
            return kExitOk;
        }
        if (train_examples->parsed()) {
            print_summary(engine.train_examples(examples_file));
            engine.save_state();
            return kExitOk;
        }
        if (train_schema->parsed()) {
            print_summary(engine.train_schema(schema_file));
            engine.save_state();
            return kExitOk;
        }
        if (calibrate->parsed()) {
            auto profile = engine.run_calibration();
            std::cout << profile.to_json().dump(2) << "\n";
            return kExitOk;
        }
        if (ask->parsed()) {
            auto result = engine.ask(question, explain);
            if (as_json)
                std::cout << result.to_json().dump(2) << "\n";
            else
                std::cout << result.sql << "\n";
            return kExitOk;
        }
        if (inspect->parsed()) {
            auto doc = engine.inspect(table);
            if (!doc) {
                std::cerr << "table '" << table << "' is not in the catalog\n";
                return kExitError;
            }
            std::cout << doc->to_json().dump(2) << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        return map_error(e);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    }
    return kExitOk;
}
