#pragma once

#include <stdexcept>
#include <string>

namespace plab {

/// Every failed contract in the library throws this with a message that
/// names the operation and the offending values.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace plab
