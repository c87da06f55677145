#pragma once

namespace fenet {

inline constexpr const char* version = "0.1.0";

} // namespace fenet
