#pragma once

namespace semcom {

inline constexpr const char* kVersion = "semcom-0.1.0";

}  // namespace semcom
