#include "mchr/error.hpp"

namespace mchr {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::input: return "input";
    case Errc::validation: return "validation";
    case Errc::config: return "config";
    case Errc::adapter: return "adapter";
    case Errc::contract: return "contract";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::storage: return "storage";
    case Errc::corruption: return "corruption";
    case Errc::invalid_label: return "invalid_label";
    case Errc::label_out_of_space: return "label_out_of_space";
    case Errc::bad_cursor: return "bad_cursor";
    case Errc::incomplete: return "incomplete";
    case Errc::unsupported: return "unsupported";
  }
  return "unknown";
}

}  // namespace mchr
