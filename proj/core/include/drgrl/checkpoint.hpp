#pragma once

#include <filesystem>
#include <iosfwd>

#include "drgrl/policy.hpp"

namespace drgrl {

// Binary container, all integers little-endian:
//   magic "DRGRLPOL" | u32 version (1) | u32 tag length | tag bytes |
//   u32 vocab_size | u32 context_window | u32 hidden_width |
//   u64 parameter count | parameters as IEEE-754 binary64 bit patterns.
// Identical parameters always serialize to identical bytes.
void SaveCheckpoint(const PolicyParams& p, std::ostream& out);
void SaveCheckpoint(const PolicyParams& p, const std::filesystem::path& path);

// Throws Error on a bad magic, version, or inconsistent dimensions.
PolicyParams LoadCheckpoint(std::istream& in);
PolicyParams LoadCheckpoint(const std::filesystem::path& path);

}  // namespace drgrl
