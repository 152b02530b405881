#pragma once

#define DELAYKINETIC_VERSION "0.1.0"

namespace delaykinetic {

inline constexpr const char* version() { return DELAYKINETIC_VERSION; }

}  // namespace delaykinetic
