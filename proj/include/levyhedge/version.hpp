#pragma once

namespace levyhedge {

inline constexpr const char* kVersion = "0.1.0";

} // namespace levyhedge
