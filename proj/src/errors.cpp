#include "bq/errors.hpp"

namespace bq {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::degenerate_data: return "degenerate data";
        case ErrorKind::insufficient_jumps: return "insufficient jumps";
        case ErrorKind::degenerate_prior: return "degenerate prior";
        case ErrorKind::degenerate_density: return "degenerate density";
        case ErrorKind::numerical: return "numerical error";
        case ErrorKind::reliability: return "reliability error";
        case ErrorKind::io: return "i/o error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

SeriesDomainError::SeriesDomainError(long term, double shifted_strike)
    : Error(ErrorKind::domain, "Merton series term n=" + std::to_string(term) +
                                   " has shifted strike K - n*m = " +
                                   std::to_string(shifted_strike) + " <= 0"),
      term_(term),
      shifted_strike_(shifted_strike) {}

ReliabilityError::ReliabilityError(std::size_t rejected, std::size_t total)
    : Error(ErrorKind::reliability, std::to_string(rejected) + " of " + std::to_string(total) +
                                        " posterior samples rejected (limit 1%)"),
      rejected_(rejected),
      total_(total) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace bq
