#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace obswin {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitNoReference = 2;
inline constexpr int kExitUsage = 64;

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace obswin
