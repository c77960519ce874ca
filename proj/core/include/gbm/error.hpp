#pragma once

#include <stdexcept>
#include <string>

namespace gbm {

// Error categories. The CLI maps each category to a distinct exit code and
// tests match on the category instead of the message text.
enum class ErrorCode {
    shape,                 // dimension mismatch, ragged rows
    empty_input,           // operation needs at least one (or two) rows
    parse,                 // malformed header or field while reading a file
    truncated,             // file ends before the payload promised by its header
    io,                    // file cannot be opened / written
    parameter,             // argument outside its documented range
    config,                // inconsistent run configuration
    duplicate_class,       // class id already present
    degenerate_input,      // too few samples for the requested model size
    degenerate_component,  // mixture component lost all responsibility
    empty_memory,          // generation from a store with no entries
    divergence,            // training loss became non-finite
};

const char* error_code_name(ErrorCode code);

class GbmError : public std::runtime_error {
public:
    GbmError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace gbm
