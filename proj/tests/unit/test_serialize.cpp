#include <gtest/gtest.h>

#include <sstream>

#include "cru/errors.hpp"
#include "cru/serialize.hpp"
#include "test_support.hpp"

using namespace cru;

TEST(Serialize, RoundTripIsBitExact) {
  std::mt19937_64 rng(80);
  NamedTensors in{{"a", cru::testing::random_tensor({3}, rng)},
                  {"b.weight", cru::testing::random_tensor({2, 5}, rng)},
                  {"conv", cru::testing::random_tensor({2, 3, 4}, rng)}};
  std::stringstream buf;
  write_tensors(buf, in);
  auto out = read_tensors(buf);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].first, in[i].first);
    EXPECT_EQ(out[i].second.shape(), in[i].second.shape());
    EXPECT_EQ(Tensor::max_abs_diff(out[i].second, in[i].second), 0.0);
  }
}

TEST(Serialize, HeaderLayout) {
  std::stringstream buf;
  write_tensors(buf, {{"x", Tensor::vector({1.0})}});
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "CRUTENS1");
  // magic + count + name_len + name + rank + dim + value
  EXPECT_EQ(bytes.size(), 8u + 8 + 4 + 1 + 4 + 8 + 8);
}

TEST(Serialize, RejectsMalformedInput) {
  std::stringstream bad_magic("NOTMAGIC");
  EXPECT_THROW(read_tensors(bad_magic), ParseError);
  std::stringstream buf;
  write_tensors(buf, {{"x", Tensor::vector({1.0, 2.0})}});
  std::string truncated = buf.str();
  truncated.resize(truncated.size() - 3);
  std::stringstream t(truncated);
  EXPECT_THROW(read_tensors(t), ParseError);
  EXPECT_THROW(load_tensors("/nonexistent/cru.bin"), IoError);
}
