//
// Copyright 2026 The sadcluster Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <gtest/gtest.h>

#include <cmath>

#include "sadcluster/nt_xent.hpp"
#include "sadcluster/optim.hpp"
#include "test_util.hpp"

namespace sadcluster {
namespace {

TEST(NtXent, OrthogonalNegativesClosedForm) {
  // Pairs (e1, e1) and (e2, e2): each anchor has s(pos) = 1 and two
  // negatives at s = 0, so l = -ln(e / (e + 2)).
  Matrix x(4, 2);
  x(0, 0) = x(1, 0) = 1.0;
  x(2, 1) = x(3, 1) = 1.0;
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  EXPECT_NEAR(nt_xent_loss(x, 1.0), expected, 1e-12);
  EXPECT_NEAR(expected, 0.55144, 1e-5);
}

TEST(NtXent, CollapseIsLogTwoBMinusOne) {
  for (std::size_t B = 2; B <= 8; ++B) {
    Matrix x(2 * B, 3);
    for (std::size_t i = 0; i < 2 * B; ++i) {
      x(i, 0) = 0.3;
      x(i, 1) = -1.2;
      x(i, 2) = 2.0;
    }
    EXPECT_NEAR(nt_xent_loss(x, 0.5), std::log(2.0 * B - 1.0), 1e-9);
    const Matrix g = nt_xent_gradient(x, 0.5);
    const double n0 = l2_norm(g.row(0));
    for (std::size_t i = 1; i < 2 * B; ++i) EXPECT_NEAR(l2_norm(g.row(i)), n0, 1e-12);
  }
}

TEST(NtXent, ScaleAndPairPermutationInvariant) {
  Rng rng(8);
  const Matrix x = testing::random_matrix(8, 5, rng);
  const double base = nt_xent_loss(x, 0.3);
  Matrix scaled = x;
  for (double& v : scaled.flat()) v *= 4.5;
  EXPECT_NEAR(nt_xent_loss(scaled, 0.3), base, 1e-12);

  // Swap pair blocks 0 and 2.
  Matrix swapped = x;
  for (std::size_t r = 0; r < 2; ++r) {
    std::copy(x.row(4 + r).begin(), x.row(4 + r).end(), swapped.row(r).begin());
    std::copy(x.row(r).begin(), x.row(r).end(), swapped.row(4 + r).begin());
  }
  EXPECT_NEAR(nt_xent_loss(swapped, 0.3), base, 1e-12);
  EXPECT_GE(base, 0.0);
}

TEST(NtXent, Errors) {
  EXPECT_THROW(nt_xent_loss(Matrix(2, 3), 0.5), Error);  // B = 1
  Rng rng(1);
  Matrix odd = testing::random_matrix(5, 3, rng);
  EXPECT_THROW(nt_xent_loss(odd, 0.5), Error);
  Matrix zero = testing::random_matrix(4, 3, rng);
  zero.row(2)[0] = zero.row(2)[1] = zero.row(2)[2] = 0.0;
  EXPECT_THROW(nt_xent_loss(zero, 0.5), Error);
  EXPECT_THROW(nt_xent_loss(testing::random_matrix(4, 3, rng), 0.0), Error);
}

TEST(NtXent, LargeTemperatureGradientVanishes) {
  Rng rng(2);
  const Matrix x = testing::random_matrix(6, 4, rng);
  EXPECT_LT(l2_norm(nt_xent_gradient(x, 1e6).flat()), 1e-5);
}

TEST(NtXent, StableAtSmallTemperature) {
  Rng rng(6);
  const Matrix x = testing::random_matrix(8, 4, rng);
  const auto r = nt_xent(x, 1e-3, true);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(all_finite(r.gradient.flat()));
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  const double taus[] = {0.1, 0.5, 1.0};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t B = 2 + trial % 3;
    const std::size_t d = trial % 2 ? 8 : 3;
    const double tau = taus[trial % 3];
    Matrix x = testing::random_matrix(2 * B, d, rng);
    const Matrix g = nt_xent_gradient(x, tau);
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.flat().size(); ++i) {
      const double orig = x.flat()[i];
      x.flat()[i] = orig + h;
      const double up = nt_xent_loss(x, tau);
      x.flat()[i] = orig - h;
      const double down = nt_xent_loss(x, tau);
      x.flat()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = g.flat()[i];
      EXPECT_LT(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}), 1e-4)
          << "trial " << trial << " entry " << i;
    }
  }
}

TEST(Optimizer, SgdStep) {
  std::vector<double> p{1.0};
  std::vector<double> g{0.5};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<double>> gs{g};
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.learning_rate = 0.1;
  OptimizerState st;
  optimizer_step(ps, gs, cfg, st);
  EXPECT_NEAR(p[0], 0.95, 1e-15);
}

TEST(Optimizer, AdamWFirstStep) {
  // m_hat = 0.5, v_hat = 0.25, step = 1e-3 * 0.5 / (0.5 + 1e-8).
  std::vector<double> p{1.0};
  std::vector<double> g{0.5};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<double>> gs{g};
  OptimizerConfig cfg;
  cfg.learning_rate = 1e-3;
  OptimizerState st;
  optimizer_step(ps, gs, cfg, st);
  EXPECT_NEAR(1.0 - p[0], 9.9999998e-4, 1e-12);
}

TEST(Optimizer, AdamWDecoupledDecay) {
  std::vector<double> p{2.0};
  std::vector<double> g{0.0};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<double>> gs{g};
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  OptimizerState st;
  optimizer_step(ps, gs, cfg, st);
  EXPECT_NEAR(p[0], 2.0 * (1.0 - 0.05), 1e-15);
}

TEST(Optimizer, ZeroGradientIsIdentity) {
  for (auto kind : {OptimizerKind::kAdamW, OptimizerKind::kSgd}) {
    std::vector<double> p{1.5, -2.0};
    std::vector<double> g{0.0, 0.0};
    std::vector<std::span<double>> ps{p};
    std::vector<std::span<double>> gs{g};
    OptimizerConfig cfg;
    cfg.kind = kind;
    OptimizerState st;
    for (int i = 0; i < 3; ++i) optimizer_step(ps, gs, cfg, st);
    EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
  }
}

TEST(Optimizer, RejectsNonFiniteGradient) {
  std::vector<double> p{1.0};
  std::vector<double> g{std::nan("")};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<double>> gs{g};
  OptimizerConfig cfg;
  OptimizerState st;
  try {
    optimizer_step(ps, gs, cfg, st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric);
  }
  EXPECT_EQ(p[0], 1.0);
}

}  // namespace
}  // namespace sadcluster
