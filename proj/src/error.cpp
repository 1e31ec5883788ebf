#include "ppf/error.hpp"

namespace ppf {

ParseError::ParseError(Kind kind, const std::string& message, Where where, std::uint64_t location)
    : std::runtime_error([&] {
        switch (where) {
          case Where::kLine: return message + " (line " + std::to_string(location) + ")";
          case Where::kOffset: return message + " (byte offset " + std::to_string(location) + ")";
          case Where::kNone: break;
        }
        return message;
      }()),
      kind_(kind),
      where_(where),
      location_(location) {}

}  // namespace ppf
