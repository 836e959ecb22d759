// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace seqtag {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An id (token, tag, row) lies outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value is violated (empty input, bad bounds).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input whose content is unusable (missing token text, unknown tag).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Input text that does not follow its grammar (JSON, CoNLL, config lines).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Metric computation impossible for the given counts or alignment.
class EvalError : public Error {
 public:
  using Error::Error;
};

// Model-file load failures, one type per failure mode.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class TruncationError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqtag
