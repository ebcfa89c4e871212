#include "dwt/tokens.hpp"

#include <algorithm>

namespace dwt {

Tokens pack_rows(const std::vector<std::vector<int>>& rows, int pad_id) {
  std::size_t width = 1;
  for (const auto& r : rows) width = std::max(width, r.size());
  Tokens out(rows.size(), width, pad_id);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), out.ids.begin() + static_cast<long>(i * width));
  }
  return out;
}

std::vector<int> unpad_row(const Tokens& tokens, std::size_t r, int pad_id) {
  std::vector<int> row(tokens.ids.begin() + static_cast<long>(r * tokens.cols),
                       tokens.ids.begin() + static_cast<long>((r + 1) * tokens.cols));
  while (!row.empty() && row.back() == pad_id) row.pop_back();
  return row;
}

Tokens slice_rows(const Tokens& tokens, std::size_t begin, std::size_t end, int pad_id) {
  std::vector<std::vector<int>> rows;
  rows.reserve(end - begin);
  for (std::size_t r = begin; r < end; ++r) rows.push_back(unpad_row(tokens, r, pad_id));
  return pack_rows(rows, pad_id);
}

}  // namespace dwt
