#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mchr {

// Failure classes shared by every module. The HTTP layer and the CLI map
// these onto status codes and exit codes respectively.
enum class Errc {
  input,               // unreadable input file
  validation,          // bad value in an otherwise well-formed request
  config,              // bad task/model/run configuration
  adapter,             // model transport failure or missing fixture
  contract,            // caller broke a precondition
  not_found,
  conflict,
  storage,             // event log write failure
  corruption,          // event log gap / non-monotone seq / unknown kind
  invalid_label,       // label normalizes to the empty string
  label_out_of_space,  // closed task, label not in the label space
  bad_cursor,
  incomplete,          // report requested while review cases are pending
  unsupported,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mchr
