#pragma once

#include <cstdint>

namespace fedus {

#ifdef FEDUS_VERSION
inline constexpr const char* version = FEDUS_VERSION;
#else
inline constexpr const char* version = "1.0.0";
#endif

inline constexpr std::uint32_t checkpoint_format_version = 1;

} // namespace fedus
