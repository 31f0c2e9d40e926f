#pragma once

namespace posetrack {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kFormatRevision = 1;  // bump when any on-disk format changes

}  // namespace posetrack
