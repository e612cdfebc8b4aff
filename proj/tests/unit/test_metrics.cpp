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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sadcluster/metrics.hpp"
#include "test_util.hpp"

namespace sadcluster {
namespace {

double brute_force_min_cost(const Matrix& cost) {
  std::vector<std::size_t> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(Hungarian, Examples) {
  Matrix eye(3, 3);
  eye.fill(1.0);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 0.0;
  const Assignment a = hungarian(eye);
  EXPECT_EQ(a.row_to_col, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(a.cost, 0.0);

  Matrix m(2, 2);
  m(0, 0) = 4;
  m(0, 1) = 1;
  m(1, 0) = 2;
  m(1, 1) = 3;
  const Assignment b = hungarian(m);
  EXPECT_EQ(b.row_to_col, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(b.cost, 3.0);

  Matrix bad(2, 2);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(hungarian(bad), Error);
}

TEST(Hungarian, MatchesBruteForce) {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 1 + rng.uniform_index(6);
    Matrix c(k, k);
    for (double& v : c.flat()) v = static_cast<double>(rng.uniform_index(10)) - 3.0;
    const Assignment a = hungarian(c);
    double total = 0.0;
    std::vector<bool> used(k, false);
    for (std::size_t i = 0; i < k; ++i) {
      ASSERT_FALSE(used[a.row_to_col[i]]);
      used[a.row_to_col[i]] = true;
      total += c(i, a.row_to_col[i]);
    }
    EXPECT_EQ(total, brute_force_min_cost(c));
    EXPECT_EQ(a.cost, total);
  }
}

TEST(Hungarian, Rectangular) {
  Matrix c(2, 3);
  c(0, 0) = 5;
  c(0, 1) = 1;
  c(0, 2) = 9;
  c(1, 0) = 1;
  c(1, 1) = 2;
  c(1, 2) = 9;
  const Assignment a = hungarian(c);
  EXPECT_EQ(a.row_to_col, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(a.cost, 2.0);
}

TEST(Accuracy, Examples) {
  const std::vector<int> l{0, 0, 1, 1};
  EXPECT_EQ(clustering_accuracy(l, l).acc, 1.0);
  const std::vector<int> swapped{1, 1, 0, 0};
  EXPECT_EQ(clustering_accuracy(l, swapped).acc, 1.0);
  const std::vector<int> mixed{0, 1, 0, 1};
  EXPECT_EQ(clustering_accuracy(l, mixed).acc, 0.5);
  const std::vector<int> shorter{0, 1};
  EXPECT_THROW(clustering_accuracy(l, shorter), Error);
}

TEST(Accuracy, MappingReproducesAccAndPermutationInvariant) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.uniform_index(50);
    const std::size_t kl = 1 + rng.uniform_index(5);
    const std::size_t kc = 1 + rng.uniform_index(5);
    std::vector<int> labels(n);
    std::vector<int> clusters(n);
    for (auto& v : labels) v = static_cast<int>(rng.uniform_index(kl));
    for (auto& v : clusters) v = static_cast<int>(rng.uniform_index(kc));
    const AccuracyResult r = clustering_accuracy(labels, clusters);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.mapping[static_cast<std::size_t>(clusters[i])] == labels[i]) ++hit;
    }
    EXPECT_DOUBLE_EQ(r.acc, static_cast<double>(hit) / static_cast<double>(n));
    double total = 0.0;
    for (double v : r.confusion.flat()) total += v;
    EXPECT_EQ(total, static_cast<double>(n));

    auto lp = rng.permutation(kl);
    auto cp = rng.permutation(kc);
    std::vector<int> l2(n);
    std::vector<int> c2(n);
    for (std::size_t i = 0; i < n; ++i) {
      l2[i] = static_cast<int>(lp[static_cast<std::size_t>(labels[i])]);
      c2[i] = static_cast<int>(cp[static_cast<std::size_t>(clusters[i])]);
    }
    EXPECT_DOUBLE_EQ(clustering_accuracy(l2, c2).acc, r.acc);
  }
}

TEST(Accuracy, AtLeastMajorityFraction) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<int> labels(n);
    std::vector<int> clusters(n);
    for (auto& v : labels) v = static_cast<int>(rng.uniform_index(4));
    for (auto& v : clusters) v = static_cast<int>(rng.uniform_index(4));
    // Any single cluster can be mapped to its majority label.
    std::size_t best_cell = 0;
    for (int c = 0; c < 4; ++c) {
      for (int l = 0; l < 4; ++l) {
        std::size_t cell = 0;
        for (std::size_t i = 0; i < n; ++i) cell += labels[i] == l && clusters[i] == c;
        best_cell = std::max(best_cell, cell);
      }
    }
    EXPECT_GE(clustering_accuracy(labels, clusters).acc + 1e-12,
              static_cast<double>(best_cell) / static_cast<double>(n));
  }
}

// E[MI] from exact integer binomials: P(n_ij) = C(a, n_ij) C(N - a, b - n_ij) / C(N, b).
double binom(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<double>(r);
}

double emi_oracle(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                  std::size_t n) {
  long double total = 0.0L;
  for (std::size_t ai : a) {
    for (std::size_t bj : b) {
      for (std::size_t x = 1; x <= std::min(ai, bj); ++x) {
        if (bj - x > n - ai) continue;
        const long double p = static_cast<long double>(binom(ai, x)) * binom(n - ai, bj - x) /
                              binom(n, bj);
        total += p * x / n * std::log(static_cast<long double>(n) * x / (ai * bj));
      }
    }
  }
  return static_cast<double>(total);
}

TEST(Ami, ExpectedMutualInformationMatchesOracle) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.uniform_index(29);
    auto random_sizes = [&](std::size_t k) {
      std::vector<std::size_t> sizes(k, 0);
      for (std::size_t i = 0; i < n; ++i) ++sizes[rng.uniform_index(k)];
      std::erase(sizes, 0U);
      return sizes;
    };
    const auto a = random_sizes(1 + rng.uniform_index(5));
    const auto b = random_sizes(1 + rng.uniform_index(5));
    EXPECT_NEAR(expected_mutual_information(a, b, n), emi_oracle(a, b, n), 1e-10);
  }
}

TEST(Ami, FrozenReferenceValues) {
  // Reference values from scikit-learn 1.x (arithmetic normalization).
  const std::vector<int> l{0, 0, 1, 1};
  const std::vector<int> c{0, 1, 0, 1};
  EXPECT_NEAR(adjusted_mutual_information(l, c), -0.49999999999999944, 1e-12);
  const std::vector<int> a{0, 0, 0, 1, 1, 2, 2, 2, 2, 0};
  const std::vector<int> b{1, 1, 0, 0, 2, 2, 2, 1, 0, 0};
  EXPECT_NEAR(adjusted_mutual_information(a, b), -0.03931173043502747, 1e-12);
  const std::vector<std::size_t> sa{4, 2, 4};
  const std::vector<std::size_t> sb{4, 3, 3};
  EXPECT_NEAR(expected_mutual_information(sa, sb, 10), 0.28794248125722477, 1e-12);
}

TEST(Ami, IdentitySymmetryAndDegenerate) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + rng.uniform_index(100);
    std::vector<int> x(n);
    std::vector<int> y(n);
    for (auto& v : x) v = static_cast<int>(rng.uniform_index(4));
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(3));
    if (*std::max_element(x.begin(), x.end()) > 0) {
      EXPECT_NEAR(adjusted_mutual_information(x, x), 1.0, 1e-9);
    }
    EXPECT_NEAR(adjusted_mutual_information(x, y), adjusted_mutual_information(y, x), 1e-12);
    std::vector<int> relabeled(n);
    for (std::size_t i = 0; i < n; ++i) relabeled[i] = 7 - y[i];
    EXPECT_NEAR(adjusted_mutual_information(x, relabeled), adjusted_mutual_information(x, y), 1e-12);
  }
  const std::vector<int> ones(5, 3);
  EXPECT_EQ(adjusted_mutual_information(ones, ones), 1.0);
}

TEST(Ami, IndependentPartitionsNearZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int> x(1000);
    std::vector<int> y(1000);
    for (auto& v : x) v = static_cast<int>(rng.uniform_index(4));
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(4));
    EXPECT_LT(std::abs(adjusted_mutual_information(x, y)), 0.05);
  }
}

TEST(Silhouette, FrozenReferenceValue) {
  // scikit-learn silhouette_score(metric="cosine").
  Matrix x(5, 2);
  const double rows[5][2] = {{1, 0}, {0.8, 0.6}, {-1, 0}, {-0.6, 0.8}, {0.6, -0.8}};
  for (std::size_t i = 0; i < 5; ++i) {
    x(i, 0) = rows[i][0];
    x(i, 1) = rows[i][1];
  }
  const std::vector<std::size_t> a{0, 0, 1, 1, 0};
  EXPECT_NEAR(silhouette_score(x, a), 0.7065562456866805, 1e-12);
}

TEST(Silhouette, HandInstanceTwoOrthogonalPairs) {
  // Pairs {e1, e1'} and {e2, e2'} with a small tilt t inside each pair.
  const double t = 0.1;
  Matrix x(4, 2);
  x(0, 0) = 1;
  x(1, 0) = std::cos(t);
  x(1, 1) = std::sin(t);
  x(2, 1) = 1;
  x(3, 0) = std::sin(t);
  x(3, 1) = std::cos(t);
  const std::vector<std::size_t> a{0, 0, 1, 1};
  const double intra = 1 - std::cos(t);
  // Distances from point 0: to 2 is 1, to 3 is 1 - sin t. Point 1: to 2 is
  // 1 - sin t, to 3 is 1 - sin 2t. Points 2 and 3 mirror 0 and 1.
  const double b0 = ((1.0) + (1 - std::sin(t))) / 2;
  const double b1 = ((1 - std::sin(t)) + (1 - std::sin(2 * t))) / 2;
  const double s0 = (b0 - intra) / b0;
  const double s1 = (b1 - intra) / b1;
  EXPECT_NEAR(silhouette_score(x, a), (s0 + s1) / 2, 1e-12);
}

TEST(Silhouette, Conventions) {
  Rng rng(6);
  Matrix tight(20, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    tight(i, 0) = i < 10 ? 1.0 : -1.0;
    tight(i, 1) = 0.01 * rng.normal();
    tight(i, 2) = 0.01 * rng.normal();
  }
  std::vector<std::size_t> a(20);
  for (std::size_t i = 0; i < 20; ++i) a[i] = i < 10 ? 0 : 1;
  EXPECT_GT(silhouette_score(tight, a), 0.99);

  Matrix same(4, 2);
  for (std::size_t i = 0; i < 4; ++i) same(i, 0) = 1.0;
  const std::vector<std::size_t> forced{0, 0, 1, 1};
  EXPECT_EQ(silhouette_score(same, forced), 0.0);

  const std::vector<std::size_t> one(4, 0);
  EXPECT_THROW(silhouette_score(same, one), Error);

  // Singleton clusters contribute 0.
  Matrix y(3, 2);
  y(0, 0) = 1;
  y(1, 0) = 1;
  y(2, 1) = 1;
  const std::vector<std::size_t> s{0, 0, 1};
  EXPECT_NEAR(silhouette_score(y, s), 2.0 / 3.0, 1e-12);
}

TEST(Silhouette, SubsampleIsSeededAndFullWhenCapLarge) {
  Rng rng(7);
  const Matrix x = testing::random_matrix(200, 4, rng);
  std::vector<std::size_t> a(200);
  for (auto& v : a) v = rng.uniform_index(3);
  const double full = silhouette_score(x, a);
  EXPECT_EQ(silhouette_score(x, a, 500, 1), full);
  const double sub = silhouette_score(x, a, 50, 1);
  EXPECT_EQ(sub, silhouette_score(x, a, 50, 1));
  EXPECT_LE(std::abs(sub), 1.0);
}

TEST(Report, JsonShape) {
  const std::vector<int> l{0, 0, 1, 1};
  const std::vector<int> c{1, 1, 0, 0};
  const EvalReport r = evaluate(l, c);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["schema_version"], kMetricsSchemaVersion);
  EXPECT_EQ(j["acc"], 1.0);
  EXPECT_TRUE(j["silhouette"].is_null());
  EXPECT_EQ(j["mapping"], nlohmann::json({1, 0}));
  EXPECT_EQ(j["confusion"], nlohmann::json({{0, 2}, {2, 0}}));
}

}  // namespace
}  // namespace sadcluster
