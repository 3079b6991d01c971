// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gdistill {

/// Base class for all gdistill errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape disagreement (matmul inner dims, row counts, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A hyper-parameter or option outside its legal range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An index outside [0, n).
class IndexError : public Error {
public:
    using Error::Error;
};

/// An API precondition violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A malformed input file line; carries the offending line number.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& msg) : Error(msg), line_(-1) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Cross-field dataset inconsistency (counts, ranges, split overlap).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Binary container violation (magic, version, truncation).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Training aborted (divergent loss); carries the epoch index.
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, int epoch)
        : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace gdistill
