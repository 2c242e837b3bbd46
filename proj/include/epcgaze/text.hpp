#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace epcgaze::text {

/// Shortest decimal that round-trips to the same double; never locale-dependent.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
unsigned long long parse_uint(std::string_view s);
bool parse_bool(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace epcgaze::text
