#pragma once

#include <stdexcept>
#include <string>

namespace conlab {

/// Exception type thrown by every module. The kind selects the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Kind {
        InvalidArgument,  // precondition on an API call violated
        InvalidConfig,    // thresholds, beam widths, seeds ... out of range
        Io,               // file could not be opened, read or written
        Format,           // malformed input file contents
        Cycle,            // hierarchy is not a DAG
        NotFound,         // unknown class, image, neuron or label
        Numerical,        // optimizer or statistic could not be computed
    };

    Error(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace conlab
