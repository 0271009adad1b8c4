#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace firntda {

enum class Errc {
  io,                    // file missing, unreadable or unwritable
  format,                // malformed or truncated file contents
  unsupported_format,    // recognised container, unsupported pixel layout
  bad_maxval,            // PGM maxval other than 255
  degenerate_split,      // quadrant split of an image smaller than 2x2
  degenerate_histogram,  // Otsu on a constant image
  no_background,         // distance transform without any ICE pixel
  empty_input,
  dimension_mismatch,
  config,
  argument,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace firntda
