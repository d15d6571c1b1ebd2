#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bmjb/spectrum.hpp"

namespace bmjb {

struct CriterionResult {
  int id;
  std::string name;
  bool passed;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 20240917;
  unsigned workers = 0;
};

inline constexpr int kCriteria = 10;

CriterionResult verify_criterion(int id, const VerifyOptions& options = {});
std::vector<CriterionResult> verify_all(
    const VerifyOptions& options = {},
    const std::function<void(const CriterionResult&)>& on_result = {});

// "[PASS] 3 two-measure optimum: detail"
std::string format_result(const CriterionResult& result);

namespace oracle {

struct ScanRoot {
  double value;
  int multiplicity;
};

// Real zeros of D(lambda)/lambda on (lo, hi] from a dense grid: sign changes
// are bisected, other local minima of |D| are accepted when the relative
// residual vanishes; multiplicities come from the local power law of |D|.
std::vector<ScanRoot> real_root_scan(const CharacteristicSystem& system, double lo, double hi,
                                     int points = 120000);

}  // namespace oracle

}  // namespace bmjb
