#pragma once

#include <stdexcept>
#include <string>

namespace gplaplace {

/// Bad shapes, non-finite values, out-of-domain parameters.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Requested derivative order (or similar capability) is not implemented.
class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Roundoff outside the tolerated band; indicates a bug rather than bad input.
class InternalConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(const std::string& what, int step)
        : std::runtime_error(what), step_(step) {}
    [[nodiscard]] int step() const noexcept { return step_; }

private:
    int step_;
};

/// Malformed input file. `line` is 1-based, 0 when not line specific.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::string file, long line = 0)
        : std::runtime_error(what), file_(std::move(file)), line_(line) {}
    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    [[nodiscard]] long line() const noexcept { return line_; }

private:
    std::string file_;
    long line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gplaplace
