#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpw {

inline constexpr const char* tool_name = "cpwlat";
inline constexpr const char* tool_version = "1.0.0";

// Exit codes: 0 ok, 2 config error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, used for the config hash in output headers.
unsigned long long fnv1a64(const std::string& text);

}  // namespace cpw
