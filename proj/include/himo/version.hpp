#pragma once

namespace himo {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace himo
