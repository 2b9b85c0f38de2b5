#pragma once

#include <string>
#include <vector>

namespace lorenza::harness {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Small, fast invariant checks over the whole stack.
std::vector<SelftestCheck> run_selftest();

}  // namespace lorenza::harness
