#include "gbm/error.hpp"

namespace gbm {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::shape: return "shape error";
        case ErrorCode::empty_input: return "empty input";
        case ErrorCode::parse: return "parse error";
        case ErrorCode::truncated: return "truncated file";
        case ErrorCode::io: return "io error";
        case ErrorCode::parameter: return "parameter error";
        case ErrorCode::config: return "config error";
        case ErrorCode::duplicate_class: return "duplicate class";
        case ErrorCode::degenerate_input: return "degenerate input";
        case ErrorCode::degenerate_component: return "degenerate component";
        case ErrorCode::empty_memory: return "empty memory";
        case ErrorCode::divergence: return "divergence";
    }
    return "unknown error";
}

} // namespace gbm
