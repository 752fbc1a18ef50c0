#pragma once

namespace ipanerf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ipanerf
