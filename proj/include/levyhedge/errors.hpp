#pragma once

#include <stdexcept>
#include <string>

namespace levyhedge {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureFailure : Error {
    explicit QuadratureFailure(const std::string& what) : Error("quadrature failure: " + what) {}
};

struct DivergentExponentialMoment : Error {
    explicit DivergentExponentialMoment(const std::string& what)
        : Error("divergent exponential moment: " + what) {}
};

struct NonPositiveExponential : Error {
    explicit NonPositiveExponential(const std::string& what)
        : Error("stochastic exponential not positive: " + what) {}
};

struct NotSquareIntegrable : Error {
    explicit NotSquareIntegrable(const std::string& what)
        : Error("price process not square integrable: " + what) {}
};

struct AssumptionViolated : Error {
    explicit AssumptionViolated(const std::string& what)
        : Error("martingale-measure assumption violated: " + what) {}
};

struct IndeterminateIndex : Error {
    explicit IndeterminateIndex(const std::string& what)
        : Error("small-jump index indeterminate: " + what) {}
};

struct NoApplicableCase : Error {
    explicit NoApplicableCase(const std::string& what)
        : Error("no applicable parameter case: " + what) {}
};

struct UnsupportedSampler : Error {
    explicit UnsupportedSampler(const std::string& what)
        : Error("unsupported sampler: " + what) {}
};

struct OracleNotConverged : Error {
    explicit OracleNotConverged(const std::string& what)
        : Error("integral oracle not converged: " + what) {}
};

struct InsufficientPaths : Error {
    explicit InsufficientPaths(const std::string& what)
        : Error("insufficient paths: " + what) {}
};

struct InsufficientData : Error {
    explicit InsufficientData(const std::string& what)
        : Error("insufficient data: " + what) {}
};

struct CosTruncationError : Error {
    explicit CosTruncationError(const std::string& what)
        : Error("cosine expansion truncation: " + what) {}
};

struct PreconditionViolated : Error {
    explicit PreconditionViolated(const std::string& what)
        : Error("precondition violated: " + what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

} // namespace levyhedge
