#pragma once

#include <cstddef>
#include <vector>

namespace dwt {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kFirstPayloadId = 3;

/// Row-major [rows, cols] matrix of token ids.
struct Tokens {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> ids;

  Tokens() = default;
  Tokens(std::size_t r, std::size_t c, int fill = kPadId) : rows(r), cols(c), ids(r * c, fill) {}

  int& at(std::size_t r, std::size_t c) { return ids[r * cols + c]; }
  int at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }

  bool operator==(const Tokens&) const = default;
};

/// Pads variable-length rows to the longest one.
Tokens pack_rows(const std::vector<std::vector<int>>& rows, int pad_id = kPadId);

/// Row r with trailing pad entries removed.
std::vector<int> unpad_row(const Tokens& tokens, std::size_t r, int pad_id = kPadId);

/// Rows [begin, end) re-padded to their own longest non-pad extent.
Tokens slice_rows(const Tokens& tokens, std::size_t begin, std::size_t end, int pad_id = kPadId);

}  // namespace dwt
