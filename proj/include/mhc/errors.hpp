#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mhc {

// Bad input: shapes, ranges, malformed configs.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Formula evaluated outside its domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t iterations)
        : std::runtime_error(what), iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t last_good_step, std::string block)
        : std::runtime_error(what), last_good_step_(last_good_step), block_(std::move(block)) {}

    std::size_t last_good_step() const noexcept { return last_good_step_; }
    const std::string& block() const noexcept { return block_; }

private:
    std::size_t last_good_step_;
    std::string block_;
};

}  // namespace mhc
