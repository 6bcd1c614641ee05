#pragma once

namespace deepida {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deepida
