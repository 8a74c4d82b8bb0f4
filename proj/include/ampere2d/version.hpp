#pragma once

namespace ampere2d {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace ampere2d
