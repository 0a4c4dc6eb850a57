#pragma once

#include <stdexcept>
#include <string>

namespace pullback {

// Every failure raised by the library derives from Error. The CLI maps the
// category onto a process exit code.
enum class ErrorCategory { usage, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define PULLBACK_DEFINE_ERROR(Name, Category)                                \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(Category, what) {}    \
    }

PULLBACK_DEFINE_ERROR(ShapeError, ErrorCategory::usage);
PULLBACK_DEFINE_ERROR(InvalidArgument, ErrorCategory::usage);
PULLBACK_DEFINE_ERROR(ContractError, ErrorCategory::usage);
PULLBACK_DEFINE_ERROR(DomainError, ErrorCategory::data);
PULLBACK_DEFINE_ERROR(SymmetryError, ErrorCategory::numerical);
PULLBACK_DEFINE_ERROR(NumericalError, ErrorCategory::numerical);
PULLBACK_DEFINE_ERROR(RankError, ErrorCategory::numerical);
PULLBACK_DEFINE_ERROR(FormatError, ErrorCategory::data);
PULLBACK_DEFINE_ERROR(IoError, ErrorCategory::data);
PULLBACK_DEFINE_ERROR(ParseError, ErrorCategory::data);

#undef PULLBACK_DEFINE_ERROR

}  // namespace pullback
