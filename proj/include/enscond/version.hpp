#pragma once

namespace enscond {

inline constexpr const char* kVersion = "0.1.0";

} // namespace enscond
