#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hvqa {

// Stable CLI exit codes.
enum class ExitCode : int {
    kOk = 0,
    kValidation = 1,
    kBackend = 2,
    kConfig = 3,
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a. Used for request keys and seed derivation, so it must never
// change between releases.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Mixes several integers into one well-spread seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string to_hex(std::uint64_t value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Splits a newline-delimited document into non-empty lines.
std::vector<std::string> split_lines(std::string_view text);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace hvqa
