#include "hhmm/error.hpp"

namespace hhmm {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_parameter: return "invalid_parameter";
        case ErrorKind::non_invertible: return "non_invertible";
        case ErrorKind::no_unique_stationary: return "no_unique_stationary";
        case ErrorKind::layout: return "layout";
        case ErrorKind::shape: return "shape";
        case ErrorKind::domain: return "domain";
        case ErrorKind::data: return "data";
        case ErrorKind::insufficient_data: return "insufficient_data";
        case ErrorKind::fit_failure: return "fit_failure";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace hhmm
