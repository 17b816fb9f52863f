#pragma once

#include <cstdint>
#include <string>

namespace scenegen {

// SHA-256 digest as a lowercase hex string; used for run-manifest content
// hashes only, not for security.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);  // FormatError when unreadable

}  // namespace scenegen
