#pragma once

#include <cmath>
#include <string>

#ifndef AJTWIN_DATA_DIR
#define AJTWIN_DATA_DIR "data"
#endif

namespace ajtwin::test {

inline std::string data_path(const std::string& relative) { return std::string(AJTWIN_DATA_DIR) + "/" + relative; }

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace ajtwin::test
