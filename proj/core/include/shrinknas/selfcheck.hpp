#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace shrinknas {

struct SelfCheckOptions {
  std::uint64_t seed = 2024;
  int gradient_points = 100;
  int monotonicity_pairs = 1000;
  /// Test hook: run the cost checks against a deliberately wrong op table.
  bool corrupt_op_table = false;
};

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::vector<std::string> groups() const;
  /// One "PASS|FAIL group/name detail" line per check.
  std::string to_text() const;
};

/// Groups: gradients, cardinality, cost-oracle, cost-monotonicity.
SelfCheckReport run_selfcheck(const SelfCheckOptions& options = {});

}  // namespace shrinknas

namespace shrinknas {

struct GradientSuiteResult {
  std::string op;
  int points = 0;
  double max_relative_error = 0.0;
};

/// Finite-difference checks at `points` random parameter/input draws for each
/// node-op type: conv1x1, sepconv3x3, concat, the highway gate/transform pair
/// under each activation, a multi-input highway node, and the classifier /
/// embedding head.
std::vector<GradientSuiteResult> run_gradient_suites(std::uint64_t seed, int points);

}  // namespace shrinknas
