#include <gtest/gtest.h>

#include "dwt/errors.hpp"
#include "dwt/key_values.hpp"
#include "dwt/tokens.hpp"

namespace dwt {
namespace {

TEST(KeyValues, ParsesCommentsAndBlankLines) {
  const auto kv = parse_key_values("# header\n\nvariant = dwlstm  # trailing\n  d_model=64\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"variant", "dwlstm"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"d_model", "64"}));
}

TEST(KeyValues, MalformedLinesNameTheLine) {
  try {
    parse_key_values("a = 1\nbroken\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_key_values("= 3\n"), ConfigError);
  EXPECT_THROW(parse_key_values("a = 1\na = 2\n"), ConfigError);
}

TEST(KeyValues, FormatRoundTrip) {
  const KeyValues kv{{"x", "1"}, {"name", "some value"}};
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
}

TEST(KeyValues, ScalarParsers) {
  EXPECT_EQ(parse_size("k", "42"), 42u);
  EXPECT_THROW(parse_size("k", "-1"), ConfigError);
  EXPECT_THROW(parse_size("k", "4x"), ConfigError);
  EXPECT_DOUBLE_EQ(parse_real("k", "1e-9"), 1e-9);
  EXPECT_THROW(parse_real("k", "nan"), ConfigError);
  EXPECT_THROW(parse_real("k", ""), ConfigError);
  EXPECT_TRUE(parse_bool("k", "true"));
  EXPECT_FALSE(parse_bool("k", "0"));
  try {
    parse_bool("tie_embeddings", "yes");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tie_embeddings"), std::string::npos);
  }
}

TEST(KeyValues, RealFormattingRoundTrips) {
  for (double v : {0.1, 1e-9, 0.98, 3.0, 123456.789, 2.0 / 3.0}) EXPECT_EQ(parse_real("k", format_real(v)), v);
  EXPECT_EQ(format_real(0.5), "0.5");
}

TEST(Tokens, PackUnpadSlice) {
  const Tokens t = pack_rows({{3, 4, 5}, {6}});
  EXPECT_EQ(t.rows, 2u);
  EXPECT_EQ(t.cols, 3u);
  EXPECT_EQ(t.ids, (std::vector<int>{3, 4, 5, 6, 0, 0}));
  EXPECT_EQ(unpad_row(t, 1), (std::vector<int>{6}));
  EXPECT_EQ(slice_rows(t, 1, 2), pack_rows({{6}}));
}

}  // namespace
}  // namespace dwt
