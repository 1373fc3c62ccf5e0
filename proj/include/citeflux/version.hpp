#pragma once

namespace citeflux {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace citeflux
