#pragma once

#include <stdexcept>
#include <string>

namespace sifr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text (LETOR lines, config files, log CSVs).
struct ParseError : Error {
  using Error::Error;
};

}  // namespace sifr
