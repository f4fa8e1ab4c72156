// SPDX-License-Identifier: MIT
#pragma once

namespace linkquant {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace linkquant
