#pragma once

#include <stdexcept>
#include <string>

namespace dbmm {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or contradictory input data (trace files, sample sets,
// machine files, configs). CLI maps these to exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

// Two samples pin different outputs for the same beta-prefix and
// alpha-input. Carries the indices of the offending samples.
class InconsistentSamplesError : public DataError {
public:
    InconsistentSamplesError(std::size_t first, std::size_t second, const std::string& detail)
        : DataError("inconsistent samples " + std::to_string(first) + " and " +
                    std::to_string(second) + ": " + detail),
          first_sample(first),
          second_sample(second) {}

    std::size_t first_sample;
    std::size_t second_sample;
};

// A verification budget (search nodes, history depth) was exhausted
// before the check could finish.
class BudgetExceededError : public Error {
public:
    using Error::Error;
};

// Environment generation could not satisfy its constraints within the
// retry bound.
class GenerationError : public Error {
public:
    using Error::Error;
};

}  // namespace dbmm
