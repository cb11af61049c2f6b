#include "wchamfer/kv_config.hpp"

#include <fstream>
#include <set>

#include "wchamfer/errors.hpp"

namespace wchamfer {

std::vector<std::pair<std::string, std::string>> load_kv_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open config file: " + path);
  }
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> keys;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw domain_error("malformed config line " + std::to_string(line_no) + " in " +
                         path + " (want key=value)");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (!keys.insert(key).second) {
      throw domain_error("duplicate config key '" + key + "' at line " +
                         std::to_string(line_no) + " in " + path);
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

}  // namespace wchamfer
