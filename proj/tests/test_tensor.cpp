#include <gtest/gtest.h>

#include "fdgan/tensor.hpp"

using namespace fdgan;

TEST(Tensor, DataLengthMatchesShape) {
  Tensor t(Shape{2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_FALSE(t.has_grad());
  t.ensure_grad();
  EXPECT_EQ(t.grad().size(), t.size());
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  std::vector<float> v(24);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  Tensor t(Shape{2, 3, 2, 2}, v);
  EXPECT_EQ(t(1, 2, 1, 0), 22.0f);
  EXPECT_EQ(t(0, 1, 0, 1), 5.0f);
  EXPECT_EQ(t.plane(1, 0)[3], 15.0f);
}

TEST(Tensor, ShapeErrorNamesBothShapes) {
  try {
    require_same_shape(Shape{1, 3, 4, 4}, Shape{1, 2, 4, 4}, "op");
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x3x4x4"), std::string::npos);
    EXPECT_NE(msg.find("1x2x4x4"), std::string::npos);
  }
}

TEST(Tensor, CastKeepsGradient) {
  Tensor t(Shape{1, 1, 1, 2}, std::vector<float>{1.5f, -2.0f});
  t.ensure_grad();
  t.grad()[1] = 3.0f;
  const auto d = t.cast<double>();
  EXPECT_EQ(d[0], 1.5);
  EXPECT_EQ(d.grad()[1], 3.0);
}

TEST(Tensor, SliceAndStackRoundTrip) {
  std::vector<float> v(16);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  Tensor t(Shape{4, 1, 2, 2}, v);
  const auto a = slice_batch(t, 0, 1);
  const auto b = slice_batch(t, 1, 3);
  EXPECT_EQ(b.shape(), (Shape{3, 1, 2, 2}));
  EXPECT_EQ(stack_batch<float>({&a, &b}), t);
  EXPECT_THROW(slice_batch(t, 3, 2), ShapeError);
}

TEST(Tensor, Arithmetic) {
  Tensor a(Shape{1, 1, 1, 3}, std::vector<float>{1, 2, 3});
  Tensor b(Shape{1, 1, 1, 3}, std::vector<float>{1, 1, 1});
  a += b;
  EXPECT_EQ(sum(a), 9.0);
  axpy(a, 2.0f, b);
  EXPECT_EQ(mean(a), 5.0);
  EXPECT_EQ(scaled(b, 4.0f)[2], 4.0f);
  EXPECT_THROW(a += Tensor(Shape{1, 1, 1, 2}), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t(Shape{1, 1, 1, 2});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}
