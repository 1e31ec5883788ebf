#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppf {

/// Malformed or unsupported input file. `location` is a 1-based line number
/// for text sections or a byte offset for binary sections (see `kind`).
class ParseError : public std::runtime_error {
 public:
  enum class Kind { kMalformedHeader, kTruncatedBody, kMalformedBody, kUnsupported, kIo };
  enum class Where { kLine, kOffset, kNone };

  ParseError(Kind kind, const std::string& message, Where where = Where::kNone,
             std::uint64_t location = 0);

  Kind kind() const { return kind_; }
  Where where() const { return where_; }
  std::uint64_t location() const { return location_; }

 private:
  Kind kind_;
  Where where_;
  std::uint64_t location_;
};

}  // namespace ppf
