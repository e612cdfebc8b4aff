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

#include "sadcluster/tfidf.hpp"
#include "test_util.hpp"

namespace sadcluster {
namespace {

using testing::corpus_of;

SparseVector sparse(std::vector<std::size_t> idx, std::vector<double> val, std::size_t dim) {
  return SparseVector{std::move(idx), std::move(val), dim};
}

TEST(FitTfIdf, HandCounts) {
  const TfIdfModel m = fit_tfidf(corpus_of({"a b", "a"}));
  EXPECT_EQ(m.num_docs, 2U);
  const std::size_t a = m.vocabulary.at("a");
  const std::size_t b = m.vocabulary.at("b");
  EXPECT_EQ(m.df[a], 2U);
  EXPECT_EQ(m.df[b], 1U);
  EXPECT_DOUBLE_EQ(m.idf[a], 1.0);
  EXPECT_DOUBLE_EQ(m.idf[b], std::log(3.0 / 2.0) + 1.0);
}

TEST(FitTfIdf, SingleDocUniformIdf) {
  const TfIdfModel m = fit_tfidf(corpus_of({"x y z x"}));
  for (double v : m.idf) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(FitTfIdf, ErrorsOnEmpty) {
  EXPECT_THROW(fit_tfidf(Corpus{}), Error);
  EXPECT_THROW(fit_tfidf(corpus_of({"", "  ..."})), Error);
}

TEST(FitTfIdf, LowercasesAndSplitsOnPunctuation) {
  const TfIdfModel m = fit_tfidf(corpus_of({"Hello, WORLD! hello-world"}));
  EXPECT_EQ(m.dim(), 2U);
  EXPECT_TRUE(m.vocabulary.contains("hello"));
  EXPECT_TRUE(m.vocabulary.contains("world"));
}

TEST(Transform, NormalizedHandValues) {
  const TfIdfModel m = fit_tfidf(corpus_of({"a b"}));
  const SparseVector v = transform(m, std::string_view("a a b"));
  ASSERT_EQ(v.nnz(), 2U);
  EXPECT_NEAR(v.values[m.vocabulary.at("a") == v.indices[0] ? 0 : 1], 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(v.values[m.vocabulary.at("b") == v.indices[0] ? 0 : 1], 1.0 / std::sqrt(5.0), 1e-15);
  const SparseVector again = transform(m, std::string_view("a a b"));
  EXPECT_EQ(v.indices, again.indices);
  EXPECT_EQ(v.values, again.values);
}

TEST(Transform, AllOovIsZero) {
  const TfIdfModel m = fit_tfidf(corpus_of({"a b"}));
  EXPECT_TRUE(transform(m, std::string_view("zzz qqq")).is_zero());
}

TEST(Transform, UnitNormAndSortedIndices) {
  const Corpus c = corpus_of({"the cat sat", "the dog ran far", "a cat and a dog", "birds fly"});
  const TfIdfModel m = fit_tfidf(c);
  for (const auto& v : transform_corpus(m, c)) {
    double sq = 0.0;
    for (double x : v.values) {
      EXPECT_GT(x, 0.0);
      sq += x * x;
    }
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-9);
    EXPECT_TRUE(std::is_sorted(v.indices.begin(), v.indices.end()));
  }
}

TEST(Cosine, Examples) {
  const auto a = sparse({0, 1}, {1, 1}, 3);
  const auto b = sparse({0, 2}, {1, 1}, 3);
  EXPECT_NEAR(cosine_similarity(a, b), 0.5, 1e-15);
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(sparse({0}, {1}, 3), sparse({1}, {2}, 3)), 0.0);
  EXPECT_EQ(cosine_similarity(sparse({}, {}, 3), a), 0.0);
  const std::vector<double> x{1, 1, 0};
  const std::vector<double> y{1, 0, 1};
  EXPECT_NEAR(cosine_similarity(std::span<const double>(x), std::span<const double>(y)), 0.5, 1e-15);
}

TEST(Cosine, SymmetricBoundedScaleInvariant) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(6);
    std::vector<double> b(6);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double s = cosine_similarity(std::span<const double>(a), std::span<const double>(b));
    EXPECT_EQ(s, cosine_similarity(std::span<const double>(b), std::span<const double>(a)));
    EXPECT_LE(std::abs(s), 1.0 + 1e-12);
    std::vector<double> scaled = a;
    for (auto& v : scaled) v *= 3.7;
    EXPECT_NEAR(cosine_similarity(std::span<const double>(scaled), std::span<const double>(b)), s,
                1e-12);
  }
}

TEST(TopOne, Examples) {
  Matrix two(2, 2);
  two(0, 0) = 1;
  two(1, 0) = 1;
  const auto p2 = top1_positive_sampling(two);
  EXPECT_EQ(p2.partner, (std::vector<std::size_t>{1, 0}));

  Matrix onehot(3, 2);
  onehot(0, 0) = 1;
  onehot(1, 0) = 1;
  onehot(2, 1) = 1;
  EXPECT_EQ(top1_positive_sampling(onehot).partner, (std::vector<std::size_t>{1, 0, 0}));

  Matrix same(4, 3);
  same.fill(1.0);
  EXPECT_EQ(top1_positive_sampling(same).partner, (std::vector<std::size_t>{1, 0, 0, 0}));

  EXPECT_THROW(top1_positive_sampling(Matrix(1, 3)), Error);
}

TEST(TopOne, MatchesBruteForce) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.uniform_index(60);
    Matrix x = testing::random_matrix(n, 4, rng);
    // Duplicate some rows to force ties.
    for (std::size_t i = 1; i < n; i += 5) {
      std::copy(x.row(i - 1).begin(), x.row(i - 1).end(), x.row(i).begin());
    }
    const auto p = top1_positive_sampling(x);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = n;
      double best_s = -2.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = cosine_similarity(x.row(i), x.row(j));
        if (s > best_s) {
          best_s = s;
          best = j;
        }
      }
      ASSERT_EQ(p.partner[i], best);
      ASSERT_NE(p.partner[i], i);
    }
  }
}

TEST(Blended, Examples) {
  Matrix t(1, 2);
  t(0, 0) = 0.8;
  t(0, 1) = -0.0;
  Matrix m(1, 2);
  m(0, 0) = 0.4;
  m(0, 1) = 0.3;
  const Matrix e1 = blended_similarity(t, m, 0.37, 1);
  EXPECT_TRUE(std::signbit(e1(0, 1)));
  EXPECT_EQ(e1(0, 0), 0.8);
  EXPECT_NEAR(blended_similarity(t, m, 0.5, 3)(0, 0), 0.5, 1e-15);
  EXPECT_EQ(blended_similarity(t, m, 0.0, 2)(0, 0), 0.4);
  EXPECT_THROW(blended_similarity(t, Matrix(2, 2), 0.5, 2), Error);
}

TEST(LabelMatch, Examples) {
  PositivePairing p{{1, 0, 3, 2}, {1, 1, 1, 1}};
  const std::vector<std::optional<int>> same{0, 0, 1, 1};
  EXPECT_EQ(label_match_rate(p, same), 1.0);
  const std::vector<std::optional<int>> cross{0, 1, 0, 1};
  EXPECT_EQ(label_match_rate(p, cross), 0.0);
  const std::vector<std::optional<int>> missing{0, std::nullopt, 1, 1};
  EXPECT_THROW(label_match_rate(p, missing), Error);
}

TEST(LabelMatch, DisjointTopicsAlwaysMatch) {
  Corpus c;
  for (int t = 0; t < 4; ++t) {
    for (int i = 0; i < 5; ++i) {
      std::string text;
      for (int w = 0; w < 6; ++w) text += "t" + std::to_string(t) + "w" + std::to_string((i * 7 + w * 3) % 11) + " ";
      c.documents.push_back(make_document(std::to_string(t) + "-" + std::to_string(i), text, t));
    }
  }
  const auto m = fit_tfidf(c);
  const auto p = top1_positive_sampling(transform_corpus(m, c));
  EXPECT_EQ(label_match_rate(p, corpus_labels(c)), 1.0);
}

}  // namespace
}  // namespace sadcluster
