#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed JSON in a config document. Line and column are 1-based.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// A key the config schema does not know about.
class UnknownFieldError : public Error {
public:
    UnknownFieldError(const std::string& path, const std::string& key)
        : Error("unknown field '" + key + "' in " + path), key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Structurally valid document with a wrong type or value for a known field.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A name that refers to something the definition does not contain.
class ReferenceError : public Error {
public:
    using Error::Error;
};

/// Argument outside the operation's domain (bad fraction, out-of-range counter reading).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Run table would exceed the configured cap.
class OverflowError : public Error {
public:
    using Error::Error;
};

class IllegalTransition : public Error {
public:
    using Error::Error;
};

/// Journal damaged somewhere other than a torn final line.
class JournalCorruption : public Error {
public:
    using Error::Error;
};

/// Writing durable state (journal, status, CSV) failed.
class StorageError : public Error {
public:
    using Error::Error;
};

class ProfilerError : public Error {
public:
    using Error::Error;
};

class MissingMetricError : public Error {
public:
    using Error::Error;
};

/// Sample cannot support the requested statistic (too few values, zero variance).
class StatisticsError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace exr
