#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace text2sql {

// Every failure mode the engine reports, in one place. Tests match on the
// code, messages are for humans.
enum class ErrorCode {
    invalid_input,
    empty_input,
    dimension_mismatch,
    duplicate_id,
    corrupt_store,
    store_unavailable,
    missing_fixture,
    malformed_response,
    provider_unavailable,
    inconsistent_extraction,
    normalization_leak,
    degenerate_variations,
    no_tables_found,
    retrain_conflict,
    no_tables_selected,
    refinement_empty,
    invalid_profile,
    invalid_generation,
    no_context,
    io_error,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input: return "InvalidInput";
        case ErrorCode::empty_input: return "EmptyInput";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::duplicate_id: return "DuplicateId";
        case ErrorCode::corrupt_store: return "CorruptStore";
        case ErrorCode::store_unavailable: return "StoreUnavailable";
        case ErrorCode::missing_fixture: return "MissingFixture";
        case ErrorCode::malformed_response: return "MalformedResponse";
        case ErrorCode::provider_unavailable: return "ProviderUnavailable";
        case ErrorCode::inconsistent_extraction: return "InconsistentExtraction";
        case ErrorCode::normalization_leak: return "NormalizationLeak";
        case ErrorCode::degenerate_variations: return "DegenerateVariations";
        case ErrorCode::no_tables_found: return "NoTablesFound";
        case ErrorCode::retrain_conflict: return "RetrainConflict";
        case ErrorCode::no_tables_selected: return "NoTablesSelected";
        case ErrorCode::refinement_empty: return "RefinementEmpty";
        case ErrorCode::invalid_profile: return "InvalidProfile";
        case ErrorCode::invalid_generation: return "InvalidGeneration";
        case ErrorCode::no_context: return "NoContext";
        case ErrorCode::io_error: return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace text2sql
