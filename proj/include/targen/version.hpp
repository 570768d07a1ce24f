#pragma once

namespace targen {

inline constexpr const char* kToolName = "targen";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace targen
