#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace epdiff {

struct CheckResult {
  std::string suite;
  std::string name;
  /// Largest measured residual over the instances of the check.
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  /// Points per axis of the one-dimensional grids; two-dimensional checks use 16.
  int n = 32;
  /// Highest commutator order exercised, 1 or 2.
  int order = 2;
  /// Random instances per check.
  int instances = 5;

  /// Throws InvalidParameter: n must be even and at least 32 (the identity
  /// windows need room below the band edge) and at most 128.
  void validate() const;
};

/// spectral, operators, commutators, splitting, appendix, conjugation,
/// geodesic, probe
const std::vector<std::string>& verify_suite_names();

/// Runs one suite. Failures are reported as entries, never thrown; unknown
/// suites and invalid options throw InvalidParameter.
std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyOptions& opt);

/// Every suite in order.
std::vector<CheckResult> run_verify_all(const VerifyOptions& opt);

/// {"seed", "n", "order", "instances", "all_pass", "checks": [...]}
std::string verify_report_json(const std::vector<CheckResult>& results, const VerifyOptions& opt);

}  // namespace epdiff
