#pragma once

#include <string>
#include <utility>
#include <vector>

namespace wchamfer {

// Flat key=value file; '#' comments and blank lines are skipped. Order is
// preserved and duplicate keys are rejected.
std::vector<std::pair<std::string, std::string>> load_kv_config(const std::string& path);

}  // namespace wchamfer
