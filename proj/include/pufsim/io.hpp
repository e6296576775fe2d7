#pragma once

#include <string>
#include <string_view>

namespace pufsim {

/// Writes `contents` to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

/// printf("%.17g"), the shortest format guaranteed to round-trip a double.
std::string format_exact(double value);

} // namespace pufsim
