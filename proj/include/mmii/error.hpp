#pragma once

#include <stdexcept>
#include <string>

namespace mmii {

enum class Errc {
  missing_file,
  bad_format,
  empty_mesh,
  open_mesh,
  invalid_argument,
  degenerate,
  unknown_tissue,
  disconnected_mesh,
  not_psd,
  no_convergence,
  empty_model,
  invalid_vertex,
  empty_sample,
  truncated,
  bad_padding,
  bad_address,
  unknown_type_tag,
  unsupported_type,
  schema_mismatch,
  unknown_address,
  cache_mismatch,
  silent_input,
  too_short,
  empty_group,
  io_error,
  config_error,
};

const char* to_string(Errc code) noexcept;

// Every recoverable failure in the library is reported as an Error carrying
// a code, so callers (and tests) can branch on the category without parsing
// messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmii
