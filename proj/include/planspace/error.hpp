#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace planspace {

enum class ErrorCode {
    NotApplicable,
    SyntaxError,
    UnsupportedFeature,
    TypeError,
    GroundingBlowup,
    ConstraintViolated,
    TypeMismatch,
    FormulaTooLarge,
    MissingGlobalHard,
    UnknownProperty,
    OracleUnknown,
    GlobalHardUnsolvable,
    QuestionTooLarge,
    DemoNotBuilt,
    ConfigError,
    IterationLimit,
    TimeLimit,
    PlannerResourceLimit,
    QuestionsDisabled,
    NoCurrentPlan,
    NotUnsatisfied,
    NotUnsolvable,
    UtilityUnassigned,
    InvalidTask,
    Validation,
    NotFound,
    StoreCorrupt,
    PortInUse,
    Backlog,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NotApplicable: return "NOT_APPLICABLE";
    case ErrorCode::SyntaxError: return "SYNTAX_ERROR";
    case ErrorCode::UnsupportedFeature: return "UNSUPPORTED_FEATURE";
    case ErrorCode::TypeError: return "TYPE_ERROR";
    case ErrorCode::GroundingBlowup: return "GROUNDING_BLOWUP";
    case ErrorCode::ConstraintViolated: return "CONSTRAINT_VIOLATED";
    case ErrorCode::TypeMismatch: return "TYPE_MISMATCH";
    case ErrorCode::FormulaTooLarge: return "FORMULA_TOO_LARGE";
    case ErrorCode::MissingGlobalHard: return "MISSING_GLOBAL_HARD";
    case ErrorCode::UnknownProperty: return "UNKNOWN_PROPERTY";
    case ErrorCode::OracleUnknown: return "ORACLE_UNKNOWN";
    case ErrorCode::GlobalHardUnsolvable: return "GLOBAL_HARD_UNSOLVABLE";
    case ErrorCode::QuestionTooLarge: return "QUESTION_TOO_LARGE";
    case ErrorCode::DemoNotBuilt: return "DEMO_NOT_BUILT";
    case ErrorCode::ConfigError: return "CONFIG_ERROR";
    case ErrorCode::IterationLimit: return "ITERATION_LIMIT";
    case ErrorCode::TimeLimit: return "TIME_LIMIT";
    case ErrorCode::PlannerResourceLimit: return "PLANNER_RESOURCE_LIMIT";
    case ErrorCode::QuestionsDisabled: return "QUESTIONS_DISABLED";
    case ErrorCode::NoCurrentPlan: return "NO_CURRENT_PLAN";
    case ErrorCode::NotUnsatisfied: return "NOT_UNSATISFIED";
    case ErrorCode::NotUnsolvable: return "NOT_UNSOLVABLE";
    case ErrorCode::UtilityUnassigned: return "UTILITY_UNASSIGNED";
    case ErrorCode::InvalidTask: return "INVALID_TASK";
    case ErrorCode::Validation: return "VALIDATION_ERROR";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::StoreCorrupt: return "STORE_CORRUPT";
    case ErrorCode::PortInUse: return "PORT_IN_USE";
    case ErrorCode::Backlog: return "JOB_BACKLOG";
    }
    return "UNKNOWN";
}

/// Every failure surfaced by the library. `details` carries machine-readable
/// context (failing step, source position, offending id, ...).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(std::string(to_string(code)) + ": " + message)
        , code_(code)
        , message_(message)
        , details_(std::move(details))
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    const nlohmann::json& details() const noexcept { return details_; }

    nlohmann::json to_json() const
    {
        return {{"code", std::string(to_string(code_))},
                {"message", message_},
                {"details", details_}};
    }

private:
    ErrorCode code_;
    std::string message_;
    nlohmann::json details_;
};

} // namespace planspace
