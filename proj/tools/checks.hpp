#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mddm::checks {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const;
};

// uniformity, posterior, geometry, gradients, invariance, md, formats
const std::vector<std::string>& suite_names();

// Runs one suite with fixed seeds derived from `seed`. Throws std::invalid_argument on an unknown name.
SuiteResult run_suite(const std::string& name, std::uint64_t seed = 0);

}  // namespace mddm::checks
