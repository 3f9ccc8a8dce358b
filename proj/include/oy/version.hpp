#pragma once

namespace oy {
inline constexpr const char* kVersion = "oyflow 0.1.0";
}
