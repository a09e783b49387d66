#pragma once

namespace spdhg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spdhg
