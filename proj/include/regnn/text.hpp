#pragma once

#include <string>

namespace regnn {

/// Locale-independent, 17 significant digits; parsing the result gives back the same double.
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace regnn
