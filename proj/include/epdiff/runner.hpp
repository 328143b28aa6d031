#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "epdiff/errors.hpp"
#include "epdiff/verify.hpp"

namespace epdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Environment variable that overrides the root for relative output paths.
inline constexpr const char* kOutputRootEnv = "EPDIFF_OUTPUT_ROOT";

/// A configuration entry failed validation. `field` is `section.key`.
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string field, const std::string& message)
      : ValidationError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunOutcome {
  int exit_code = kExitOk;
  /// Where artifacts went; empty when the config was rejected before the
  /// output directory was known.
  std::filesystem::path output_dir;
  /// Summary on success, error object otherwise.
  std::string json;
};

/// Executes the pipeline named by `[run] kind` in an INI experiment file.
/// Never throws: validation failures give exit 2, numerical failures exit 3,
/// both with an error JSON (also written to output_dir/error.json when known).
RunOutcome run_experiment(const std::filesystem::path& config_path);

/// Same file format; requires a `[ladder]` section with `dt` or `n`.
RunOutcome run_convergence(const std::filesystem::path& config_path);

/// Runs the property suites and writes verify-seed<seed>[-<suite>].json under
/// the output root. Exit 3 when any check fails.
RunOutcome run_verify(const VerifyOptions& opt, const std::optional<std::string>& suite);

/// Root for relative output paths: $EPDIFF_OUTPUT_ROOT, else the working directory.
std::filesystem::path output_root();

}  // namespace epdiff
