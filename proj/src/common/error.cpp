#include "mmii/error.hpp"

namespace mmii {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::missing_file: return "missing_file";
    case Errc::bad_format: return "bad_format";
    case Errc::empty_mesh: return "empty_mesh";
    case Errc::open_mesh: return "open_mesh";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::degenerate: return "degenerate";
    case Errc::unknown_tissue: return "unknown_tissue";
    case Errc::disconnected_mesh: return "disconnected_mesh";
    case Errc::not_psd: return "not_psd";
    case Errc::no_convergence: return "no_convergence";
    case Errc::empty_model: return "empty_model";
    case Errc::invalid_vertex: return "invalid_vertex";
    case Errc::empty_sample: return "empty_sample";
    case Errc::truncated: return "truncated";
    case Errc::bad_padding: return "bad_padding";
    case Errc::bad_address: return "bad_address";
    case Errc::unknown_type_tag: return "unknown_type_tag";
    case Errc::unsupported_type: return "unsupported_type";
    case Errc::schema_mismatch: return "schema_mismatch";
    case Errc::unknown_address: return "unknown_address";
    case Errc::cache_mismatch: return "cache_mismatch";
    case Errc::silent_input: return "silent_input";
    case Errc::too_short: return "too_short";
    case Errc::empty_group: return "empty_group";
    case Errc::io_error: return "io_error";
    case Errc::config_error: return "config_error";
  }
  return "unknown";
}

}  // namespace mmii
