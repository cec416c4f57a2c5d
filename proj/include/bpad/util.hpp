#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace bpad {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stage seeds from one global seed.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named stage: splitmix64(global ^ fnv1a(stage)).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Writes `content` to `path` through a temporary sibling file and a rename.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

namespace log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Current verbosity, read once from BPAD_LOG (error|warn|info|debug); default warn.
Level level();
void warn(std::string_view message);
void info(std::string_view message);
void debug(std::string_view message);

}  // namespace log

}  // namespace bpad
