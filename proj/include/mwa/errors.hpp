#pragma once

#include <stdexcept>
#include <string>

namespace mwa {

/// Malformed input text (JSON, Pharaoh, embedding tables, config files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a data invariant (index range, duplicate ids, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or mismatched binary files (embeddings, checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pair id requested from a contextual embedding store that does not hold it.
class MissingPairError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinite values reaching the lattice or the loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mwa
