#pragma once

#include <stdexcept>
#include <string>

namespace cpw {

// Config errors come from bad inputs (exit code 2); numeric errors come from
// a solver or formula that cannot produce a trustworthy answer (exit code 3).
enum class ErrorClass { config, numeric };

class Error : public std::runtime_error {
public:
    Error(std::string kind, ErrorClass cls, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)), cls_(cls) {}
    const std::string& kind() const noexcept { return kind_; }
    ErrorClass error_class() const noexcept { return cls_; }

private:
    std::string kind_;
    ErrorClass cls_;
};

#define CPW_DEFINE_ERROR(Name, Cls)                                              \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& msg) : Error(#Name, ErrorClass::Cls, msg) {} \
    };

CPW_DEFINE_ERROR(ParseError, config)
CPW_DEFINE_ERROR(ValidationError, config)
CPW_DEFINE_ERROR(DanglingReference, config)
CPW_DEFINE_ERROR(DomainError, config)
CPW_DEFINE_ERROR(TopologyError, config)
CPW_DEFINE_ERROR(IndexError, config)
CPW_DEFINE_ERROR(NoSolutionError, config)
CPW_DEFINE_ERROR(FluxSweetSpotError, config)
CPW_DEFINE_ERROR(PositiveDefinitenessError, numeric)
CPW_DEFINE_ERROR(ConvergenceError, numeric)
CPW_DEFINE_ERROR(TrackingError, numeric)
CPW_DEFINE_ERROR(FitError, numeric)
CPW_DEFINE_ERROR(ResonantDenominator, numeric)
CPW_DEFINE_ERROR(AssignmentError, numeric)
CPW_DEFINE_ERROR(SingularLiouvillian, numeric)
CPW_DEFINE_ERROR(DivisionByZero, numeric)

#undef CPW_DEFINE_ERROR

}  // namespace cpw
