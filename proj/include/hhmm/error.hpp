#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hhmm {

enum class ErrorKind {
    invalid_parameter,
    non_invertible,
    no_unique_stationary,
    layout,
    shape,
    domain,
    data,
    insufficient_data,
    fit_failure,
    io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hhmm
