#pragma once

#include <stdexcept>
#include <string>

namespace treeplan {

// Error classes map 1:1 onto C API status codes and CLI exit codes.
enum class ErrorKind {
    Validation = 2,  // bad config, bad arguments, contract violations
    Data = 3,        // malformed or inconsistent datasets / artifacts
    Runtime = 4,     // environment, search or training failures
    Protocol = 5,    // wire protocol and session misuse
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error(ErrorKind::Validation, m) {}
};

struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

struct RuntimeError : Error {
    explicit RuntimeError(const std::string& m) : Error(ErrorKind::Runtime, m) {}
};

struct ProtocolError : Error {
    explicit ProtocolError(const std::string& m) : Error(ErrorKind::Protocol, m) {}
};

}  // namespace treeplan
