#pragma once

namespace kcpd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kcpd
