#pragma once

#include <stdexcept>
#include <string>

namespace predis {

// Exception carrying a module-specific error code. Each module declares its
// own code enum and aliases Error<Code>.
template <typename Code>
class Error : public std::runtime_error {
 public:
  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace predis
