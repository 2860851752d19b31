#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace xpasc {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256_hex(const std::filesystem::path& path);

// Hash of an ordered list of strings; each element is length-prefixed so that
// ("ab","c") and ("a","bc") differ.
std::string sequence_digest(std::span<const std::string> items);

// FNV-1a, used only to derive stable seeds from names and ids.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// Named random stream derived from the run seed. Every consumer of randomness
// (shuffle, init, tie-break, lf-sampling) gets its own stream.
inline std::mt19937_64 derive_stream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t h = stable_hash(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace xpasc
