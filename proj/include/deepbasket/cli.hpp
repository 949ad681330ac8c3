#pragma once

#include <cstdint>
#include <string_view>

namespace deepbasket {

inline constexpr int kConfigVersion = 1;

// 64-bit FNV-1a; used for the manifest's config hash.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Entry point for the `deepbasket` executable. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace deepbasket
