#pragma once

#include <stdexcept>
#include <string>

namespace nexus {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingBindingError : Error {
    using Error::Error;
};
struct ValueOutOfDomainError : Error {
    using Error::Error;
};
struct UnknownIdError : Error {
    using Error::Error;
};
struct UnknownSnapshotError : Error {
    using Error::Error;
};
struct SchemaMismatchError : Error {
    using Error::Error;
};
struct BudgetTooSmallError : Error {
    using Error::Error;
};
struct MalformedPlanError : Error {
    MalformedPlanError(const std::string& message, std::string line)
        : Error(message), offending_line(std::move(line)) {}
    std::string offending_line;
};
struct PlannerCollapseError : Error {
    using Error::Error;
};
struct UnknownToolError : Error {
    using Error::Error;
};
struct MissingPricingError : Error {
    using Error::Error;
};
struct ZeroGapError : Error {
    using Error::Error;
};
struct TaskSetMismatchError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct SuiteLoadError : Error {
    using Error::Error;
};

}  // namespace nexus
