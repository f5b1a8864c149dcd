#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace dsafe {

/// Shortest round-trip decimal representation; locale-independent so CSV
/// bytes are identical across platforms for identical doubles.
inline void append_number(std::string& out, double value) {
  char buf[32];
  auto result = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, result.ptr);
}

inline void append_number(std::string& out, long long value) {
  char buf[24];
  auto result = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, result.ptr);
}

inline void append_number(std::string& out, int value) {
  append_number(out, static_cast<long long>(value));
}

inline void append_number(std::string& out, std::uint64_t value) {
  char buf[24];
  auto result = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, result.ptr);
}

}  // namespace dsafe
