#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bq {

enum class ErrorKind {
    invalid_input,
    domain,
    degenerate_data,
    insufficient_jumps,
    degenerate_prior,
    degenerate_density,
    numerical,
    reliability,
    io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// A retained term of the strike-shifted Merton series hit K - n*m <= 0.
class SeriesDomainError : public Error {
public:
    SeriesDomainError(long term, double shifted_strike);

    long term() const noexcept { return term_; }
    double shifted_strike() const noexcept { return shifted_strike_; }

private:
    long term_;
    double shifted_strike_;
};

// Too many posterior samples were rejected by the series domain check.
class ReliabilityError : public Error {
public:
    ReliabilityError(std::size_t rejected, std::size_t total);

    std::size_t rejected() const noexcept { return rejected_; }
    std::size_t total() const noexcept { return total_; }

private:
    std::size_t rejected_;
    std::size_t total_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) fail(kind, what);
}

}  // namespace bq
