#include "cwnd/errors.hpp"

#include <utility>

namespace cwnd {

ValidationError::ValidationError(std::string what, std::vector<std::string> violations)
    : Error(std::move(what)), violations_(std::move(violations)) {}

TruncationError::TruncationError(std::string what, int suggested_n_max)
    : Error(std::move(what)), suggested_n_max_(suggested_n_max) {}

}  // namespace cwnd
