#pragma once

#include <stdexcept>
#include <string>

namespace boad {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller violated an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// Structured model output or a text document could not be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

// A persisted artifact (snapshot, event log, fixture) has the wrong shape or version.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Network-level failure after the retry budget is spent.
class TransportError : public Error {
public:
    using Error::Error;
};

// The provider answered, but with a non-2xx status or malformed body.
class ProtocolError : public Error {
public:
    ProtocolError(int status, std::string body)
        : Error("provider returned HTTP " + std::to_string(status) + ": " + body),
          status_(status),
          body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

// Corrupted or inconsistent run log.
class LogError : public Error {
public:
    LogError(const std::string& what, long long last_valid_seq)
        : Error(what + " (last valid sequence number: " + std::to_string(last_valid_seq) + ")"),
          last_valid_seq_(last_valid_seq) {}

    long long last_valid_seq() const noexcept { return last_valid_seq_; }

private:
    long long last_valid_seq_;
};

}  // namespace boad
