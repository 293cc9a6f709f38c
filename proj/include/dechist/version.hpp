#pragma once

namespace dechist {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dechist
