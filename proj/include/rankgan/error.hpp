#pragma once

#include <stdexcept>
#include <string>

namespace rankgan {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can report it with a single handler.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not line up, sequences shorter than a filter, etc.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Arguments outside a function's mathematical domain (log of a non-positive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

// API misuse: non-scalar loss, out-of-range token id, full-length rollout prefix.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

// A feature vector with zero norm cannot take part in a cosine relevance.
class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf surfaced in a loss or gradient.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankgan
