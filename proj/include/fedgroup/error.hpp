#pragma once

#include <stdexcept>
#include <string>

namespace fedgroup {

// Bad input data: CSV schema mismatches, unparsable cells, too few devices,
// missing or corrupt files. Precondition violations on arguments throw
// std::invalid_argument instead.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace fedgroup
