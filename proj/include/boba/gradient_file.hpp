#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "boba/linalg.hpp"

namespace boba {

/// Binary layout: 8-byte magic "BOBAGRAD", u32 version, u64 d, u64 n, u64 c,
/// u8 has_server, then little-endian doubles column by column: the n client
/// columns followed by the c server columns when present.
struct GradientFile {
  Matrix clients;               // d x n
  std::optional<Matrix> server; // d x c
  int num_classes = 0;
};

inline constexpr char kGradientMagic[8] = {'B', 'O', 'B', 'A', 'G', 'R', 'A', 'D'};
inline constexpr std::uint32_t kGradientFileVersion = 1;

void write_gradient_file(const std::string& path, const GradientFile& file);

/// Throws kInvalidInput on bad magic, unknown version or truncated payload.
GradientFile read_gradient_file(const std::string& path);

/// CSV view: header `kind,index,v0,...`; one row per column.
void write_gradient_text(std::ostream& out, const GradientFile& file);

}  // namespace boba
