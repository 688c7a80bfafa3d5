#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fpfuse {

// Shortest round-trip decimal form; the same bits always print the same
// bytes, which is what keeps rerun outputs byte-identical.
std::string format_double(double v);

// Write via a temp file plus rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a, used to fingerprint resolved configurations in run manifests.
std::uint64_t fnv1a(std::string_view data);

std::string hex64(std::uint64_t v);

}  // namespace fpfuse
