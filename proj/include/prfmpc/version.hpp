#pragma once

namespace prfmpc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace prfmpc
