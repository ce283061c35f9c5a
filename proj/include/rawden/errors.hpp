#pragma once

#include <stdexcept>
#include <string>

namespace rawden {

// Errors carry the CLI exit code so tools can map failures uniformly:
// 2 = configuration, 3 = I/O, 4 = dimensions.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int code) : std::runtime_error(std::move(msg)), code_(code) {}
    int exit_code() const { return code_; }

private:
    int code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

class ParameterError : public Error {
public:
    explicit ParameterError(std::string msg) : Error(std::move(msg), 2) {}
};

class IoError : public Error {
public:
    explicit IoError(std::string msg) : Error(std::move(msg), 3) {}
};

// Malformed file contents; reports the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(std::string msg, long byte_offset)
        : Error(std::move(msg) + " (byte offset " + std::to_string(byte_offset) + ")", 3),
          offset_(byte_offset) {}
    long byte_offset() const { return offset_; }

private:
    long offset_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(std::string msg) : Error(std::move(msg), 4) {}
};

} // namespace rawden
