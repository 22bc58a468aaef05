#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fuzzyjoin/encoder.hpp"
#include "fuzzyjoin/losses.hpp"
#include "test_util.hpp"

using namespace fuzzyjoin;
using fuzzyjoin::testing::central_difference;
using fuzzyjoin::testing::code_of;
using fuzzyjoin::testing::relative_error;

namespace {

using Vec = std::vector<double>;

TripletEmbeddings view(const Vec& a, const Vec& p, const Vec& n) { return {a, p, n}; }

Vec random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

LossParams params_for(LossKind kind) { return LossParams::defaults(kind); }

}  // namespace

TEST(Distance, Basics) {
  EXPECT_EQ(euclidean_distance(Vec{0, 0}, Vec{3, 4}), 5.0);
  EXPECT_EQ(euclidean_distance(Vec{1, 2}, Vec{1, 2}), 0.0);
  EXPECT_EQ(squared_distance(Vec{0, 0}, Vec{3, 4}), 25.0);
  std::mt19937_64 rng(1);
  const auto a = random_vector(7, rng);
  const auto b = random_vector(7, rng);
  EXPECT_EQ(euclidean_distance(a, b), euclidean_distance(b, a));
  EXPECT_EQ(code_of([] { euclidean_distance(Vec{1, 2}, Vec{1}); }), ErrorCode::ShapeMismatch);
}

TEST(TripletLoss, HandValues) {
  EXPECT_NEAR(triplet_loss(view({1, 0}, {0, 1}, {-1, 0}), 0.2), 0.0, 1e-12);
  EXPECT_NEAR(triplet_loss(view({1, 0}, {0, 1}, {0, 1}), 0.2), 0.2, 1e-12);
  EXPECT_EQ(triplet_loss(view({1, 0}, {1, 0}, {-1, 0}), 0.2), 0.0);
  EXPECT_EQ(code_of([] { triplet_loss(view({1, 0}, {1}, {0, 1}), 0.2); }),
            ErrorCode::ShapeMismatch);
}

TEST(ImprovedLoss, HandValues) {
  EXPECT_NEAR(improved_loss(view({1, 0}, {1, 0}, {0, 1}), 1, 0.1, 0.02), 0.0, 1e-12);
  EXPECT_NEAR(improved_loss(view({1, 0}, {-1, 0}, {0, 1}), 1, 0.1, 0.02), 3.078, 1e-12);
  // x_p = x_a, x_n at squared distance 2 >= 2α from both with α = 1.
  EXPECT_EQ(improved_loss(view({1, 0}, {1, 0}, {0, 1}), 1, 0.1, 0.02), 0.0);
}

TEST(AngularLoss, HandValues) {
  const double deg45 = std::numbers::pi / 4;
  EXPECT_EQ(angular_loss(view({0.6, 0.8}, {0.6, 0.8}, {0, 1}), deg45), 0.0);
  EXPECT_NEAR(angular_loss(view({1, 0}, {-1, 0}, {0, 1}), deg45), 0.0, 1e-12);
  EXPECT_NEAR(angular_loss(view({1, 0}, {-1, 0}, {0, 0.5}), deg45), 3.0, 1e-12);
}

TEST(AdaptedLoss, HandValues) {
  EXPECT_EQ(adapted_loss(view({0, 0}, {0, 0}, {5, 0}), 2), 0.0);
  EXPECT_NEAR(adapted_loss(view({0, 0}, {1, 0}, {1, 1}), 2),
              1 + (2 - std::sqrt(2.0)) * (2 - std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(adapted_loss(view({0, 0}, {1, 0}, {1, 1}), 2), 1.343146, 1e-6);
  EXPECT_EQ(adapted_loss(view({0, 0}, {0.5, 0}, {0, 2}), 2), 0.25);
}

TEST(AdaptedLoss, PositiveGradientByHand) {
  const Vec a{0.3, -1.2}, p{1.1, 0.4}, n{4, 4};
  const auto g = loss_gradients(view(a, p, n), params_for(LossKind::Adapted));
  EXPECT_NEAR(g.positive[0], 2 * (p[0] - a[0]), 1e-12);
  EXPECT_NEAR(g.positive[1], 2 * (p[1] - a[1]), 1e-12);
}

TEST(Losses, DefaultsAndValidation) {
  const auto t = LossParams::defaults(LossKind::Triplet);
  EXPECT_EQ(t.margin, 0.2);
  EXPECT_TRUE(t.normalize_inputs);
  const auto i = LossParams::defaults(LossKind::Improved);
  EXPECT_EQ(i.margin, 1.0);
  EXPECT_EQ(i.intra_margin, 0.1);
  EXPECT_EQ(i.lambda, 0.02);
  EXPECT_TRUE(i.normalize_inputs);
  const auto an = LossParams::defaults(LossKind::Angular);
  EXPECT_NEAR(an.angle, std::numbers::pi / 4, 1e-15);
  EXPECT_TRUE(an.normalize_inputs);
  EXPECT_FALSE(LossParams::defaults(LossKind::Adapted).normalize_inputs);

  auto bad = t;
  bad.margin = 0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
  bad = an;
  bad.angle = std::numbers::pi / 2;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(parse_loss_kind("improved"), LossKind::Improved);
  EXPECT_EQ(code_of([] { parse_loss_kind("contrastive"); }), ErrorCode::InvalidArgument);
}

TEST(BatchLoss, SumsTriplets) {
  LossParams raw = params_for(LossKind::Adapted);
  raw.margin = 2;
  const Vec a{0, 0}, b{1, 0}, c{1, 1}, far{9, 9};
  const double l1 = adapted_loss(view(a, b, c), 2);
  std::vector<TripletEmbeddings> one{view(a, b, c)};
  EXPECT_EQ(batch_loss(one, raw), l1);
  std::vector<TripletEmbeddings> two{view(a, b, c), view(a, b, c)};
  EXPECT_EQ(batch_loss(two, raw), 2 * l1);
  std::vector<TripletEmbeddings> three{view(a, b, c), view(a, a, far), view(a, c, b)};
  // (1 + (2-√2)²) + 0 + (2 + (2-1)²)
  EXPECT_NEAR(batch_loss(three, raw), 1 + std::pow(2 - std::sqrt(2.0), 2) + 3, 1e-12);
  EXPECT_EQ(code_of([&] { batch_loss({}, raw); }), ErrorCode::EmptyBatch);
}

TEST(Losses, FlatRegionHasZeroGradient) {
  const Vec a{1, 0}, p{0.99, 0.1}, n{-1, 0};
  for (auto kind : {LossKind::Triplet, LossKind::Improved, LossKind::Angular}) {
    const auto params = params_for(kind);
    ASSERT_EQ(loss_value(view(a, p, n), params), 0.0) << to_string(kind);
    const auto g = loss_gradients(view(a, p, n), params);
    for (const auto* v : {&g.anchor, &g.positive, &g.negative}) {
      for (double x : *v) EXPECT_EQ(x, 0.0) << to_string(kind);
    }
  }
}

TEST(Losses, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_vector(4, rng), p = random_vector(4, rng), n = random_vector(4, rng);
    for (auto kind : {LossKind::Triplet, LossKind::Improved, LossKind::Angular, LossKind::Adapted}) {
      EXPECT_GE(loss_value(view(a, p, n), params_for(kind)), 0.0);
    }
  }
}

TEST(Losses, NormalizedTripletIsRotationInvariant) {
  std::mt19937_64 rng(4);
  const double th = 0.77;
  auto rot = [&](const Vec& v) {
    return Vec{std::cos(th) * v[0] - std::sin(th) * v[1], std::sin(th) * v[0] + std::cos(th) * v[1]};
  };
  const auto params = params_for(LossKind::Triplet);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_vector(2, rng), p = random_vector(2, rng), n = random_vector(2, rng);
    EXPECT_NEAR(loss_value(view(a, p, n), params), loss_value(view(rot(a), rot(p), rot(n)), params),
                1e-12);
  }
}

TEST(AdaptedLoss, Monotone) {
  const Vec a{0, 0};
  double prev = -1;
  for (double d = 0; d < 3; d += 0.25) {
    const double l = adapted_loss(view(a, {d, 0}, {0, 1}), 2);
    EXPECT_GE(l, prev);
    prev = l;
  }
  prev = 1e9;
  for (double d = 0; d < 3; d += 0.25) {
    const double l = adapted_loss(view(a, {0.5, 0}, {0, d}), 2);
    EXPECT_LE(l, prev);
    prev = l;
  }
}

TEST(AngularLoss, ZeroInsideCone) {
  std::mt19937_64 rng(5);
  const double alpha = 0.6;
  const double t2 = std::tan(alpha) * std::tan(alpha);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_vector(3, rng), p = random_vector(3, rng), n = random_vector(3, rng);
    Vec c(3);
    for (int i = 0; i < 3; ++i) c[i] = (a[i] + p[i]) / 2;
    if (squared_distance(a, p) <= 4 * t2 * squared_distance(n, c)) {
      EXPECT_EQ(angular_loss(view(a, p, n), alpha), 0.0);
    }
  }
}

// Finite-difference oracle on raw inputs, including the normalization stage.
class LossGradient : public ::testing::TestWithParam<LossKind> {};

TEST_P(LossGradient, MatchesFiniteDifferences) {
  const auto params = params_for(GetParam());
  std::mt19937_64 rng(100 + static_cast<int>(GetParam()));
  int checked = 0;
  for (int trial = 0; trial < 2000 && checked < 20; ++trial) {
    std::array<Vec, 3> x{random_vector(5, rng), random_vector(5, rng), random_vector(5, rng)};
    if (GetParam() == LossKind::Adapted) {
      for (double& v : x[2]) v *= 0.3;  // keep the negative inside the margin
    }
    auto f = [&] { return loss_value(view(x[0], x[1], x[2]), params); };
    if (f() < 1e-3) continue;
    // Skip instances near a hinge kink: the loss must stay active under
    // perturbation of every coordinate.
    const auto g = loss_gradients(view(x[0], x[1], x[2]), params);
    const std::array<const Vec*, 3> grads{&g.anchor, &g.positive, &g.negative};
    bool near_kink = false;
    for (int k = 0; k < 3 && !near_kink; ++k) {
      for (std::size_t i = 0; i < 5; ++i) {
        const double up = (x[k][i] += 1e-4, f());
        const double down = (x[k][i] -= 2e-4, f());
        x[k][i] += 1e-4;
        const double slope_up = up - f(), slope_down = f() - down;
        if (std::abs(slope_up - slope_down) > 1e-5) near_kink = true;
      }
    }
    if (near_kink) continue;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < 5; ++i) {
        const double fd = central_difference(f, x[k][i], 1e-6);
        EXPECT_LT(relative_error((*grads[k])[i], fd), 1e-6)
            << to_string(GetParam()) << " arg " << k << " coord " << i;
      }
    }
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LossGradient,
                         ::testing::Values(LossKind::Triplet, LossKind::Improved,
                                           LossKind::Angular, LossKind::Adapted),
                         [](const auto& info) { return std::string(to_string(info.param)); });
