#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace synseg {

// Input that violates a type invariant or operation precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Data-level failure: missing files, bad labels, taxonomy mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Parse failure in one of the on-disk formats. `offset` is the byte offset
// at which the reader gave up.
class FormatError : public DataError {
 public:
  enum class Kind { kMalformedHeader, kTruncatedPayload, kUnsupportedProperty, kBadMagic };

  FormatError(Kind kind, std::uint64_t offset, const std::string& what);

  Kind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

// A value that cannot be represented by the target file encoding.
class EncodingRangeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace synseg
