#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gcl {

// Prints a double with 17 significant digits; round-trips exactly and is
// locale-independent, so emitted files are byte-stable across runs.
std::string fmt_g17(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace gcl
