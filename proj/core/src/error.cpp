#include "emog/error.hpp"

namespace emog {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : IoError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

}  // namespace emog
