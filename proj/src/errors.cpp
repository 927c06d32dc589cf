#include "synseg/errors.hpp"

#include <sstream>

namespace synseg {
namespace {

const char* Describe(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::kMalformedHeader: return "malformed header";
    case FormatError::Kind::kTruncatedPayload: return "truncated payload";
    case FormatError::Kind::kUnsupportedProperty: return "unsupported property";
    case FormatError::Kind::kBadMagic: return "bad magic number";
  }
  return "format error";
}

std::string Message(FormatError::Kind kind, std::uint64_t offset, const std::string& what) {
  std::ostringstream msg;
  msg << Describe(kind) << " at byte " << offset << ": " << what;
  return msg.str();
}

}  // namespace

FormatError::FormatError(Kind kind, std::uint64_t offset, const std::string& what)
    : DataError(Message(kind, offset, what)), kind_(kind), offset_(offset) {}

}  // namespace synseg
