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
#include <set>

#include "sadcluster/augment.hpp"
#include "sadcluster/rng.hpp"
#include "test_util.hpp"

namespace sadcluster {
namespace {

Document doc_with(std::size_t m) {
  std::string text;
  for (std::size_t i = 0; i < m; ++i) text += "Sentence number s" + std::to_string(i) + ". ";
  return make_document("doc" + std::to_string(m), text);
}

// Seed 91 makes the shuffler emit [4, 0, 2, 1, 3] for n = 5, found with a
// separate mt19937_64 Fisher-Yates reference.
constexpr std::uint64_t kSeedFor40213 = 91;

TEST(Rng, ReferencePermutation) {
  Rng rng(kSeedFor40213);
  EXPECT_EQ(rng.permutation(5), (std::vector<std::size_t>{4, 0, 2, 1, 3}));
}

TEST(Rng, UniformIndexInRange) {
  Rng rng(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.uniform_index(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, StreamsAreDistinct) {
  EXPECT_NE(stream_seed(1, "a"), stream_seed(1, "b"));
  EXPECT_NE(stream_seed(1, "a", 1), stream_seed(1, "a", 2));
  EXPECT_NE(stream_seed(1, "a"), stream_seed(2, "a"));
  EXPECT_EQ(stream_seed(3, "x", 4, 5), stream_seed(3, "x", 4, 5));
}

TEST(ShuffleDivide, FixedPermutation) {
  Rng rng(kSeedFor40213);
  const Document d = doc_with(5);
  const DocumentViewPair p = shuffle_divide(d, rng);
  EXPECT_EQ(p.sentence_ids_a, (std::vector<std::size_t>{4, 0, 2}));
  EXPECT_EQ(p.sentence_ids_b, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(p.view_a, d.sentences[4] + " " + d.sentences[0] + " " + d.sentences[2]);
  EXPECT_EQ(p.view_b, d.sentences[1] + " " + d.sentences[3]);
  EXPECT_EQ(p.source_id, d.id);
}

TEST(ShuffleDivide, IdentityPermutationLayout) {
  // Find a seed whose 4-permutation is the identity to check the view layout.
  const Document d = make_document("x", "s1. s2. s3. s4.");
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng probe(seed);
    if (probe.permutation(4) != std::vector<std::size_t>{0, 1, 2, 3}) continue;
    Rng rng(seed);
    const auto p = shuffle_divide(d, rng);
    EXPECT_EQ(p.view_a, "s1. s2.");
    EXPECT_EQ(p.view_b, "s3. s4.");
    return;
  }
  FAIL() << "no identity seed found";
}

TEST(ShuffleDivide, RejectsSingleSentence) {
  Rng rng(0);
  EXPECT_THROW(shuffle_divide(make_document("x", "Only one."), rng), Error);
}

TEST(ShuffleDivide, InvariantsOverRandomDocs) {
  Rng meta(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + meta.uniform_index(12);
    const Document d = doc_with(m);
    Rng rng(meta.next());
    const auto p = shuffle_divide(d, rng);
    std::vector<std::size_t> all = p.sentence_ids_a;
    all.insert(all.end(), p.sentence_ids_b.begin(), p.sentence_ids_b.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < m; ++i) ASSERT_EQ(all[i], i);
    ASSERT_EQ(all.size(), m);
    ASSERT_EQ(p.sentence_ids_a.size(), (m + 1) / 2);
  }
}

TEST(ShuffleDivideEpoch, OnePairPerDocAndDeterministic) {
  Corpus c;
  for (std::size_t m = 2; m < 9; ++m) c.documents.push_back(doc_with(m));
  const auto a = shuffle_divide_epoch(c, 3, 1);
  const auto b = shuffle_divide_epoch(c, 3, 1);
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sentence_ids_a, b[i].sentence_ids_a);
    EXPECT_EQ(a[i].source_id, c.documents[i].id);
  }
}

TEST(ShuffleDivideEpoch, EpochsProduceDifferentHalvings) {
  // A 6-sentence document has 6!/(3!3!) = 20 ordered halvings (10 unordered);
  // 1000 epochs yielding a single one has probability far below 1e-300.
  Corpus c;
  c.documents.push_back(doc_with(6));
  std::set<std::set<std::size_t>> seen;
  for (std::size_t e = 1; e <= 1000; ++e) {
    const auto p = shuffle_divide_epoch(c, 9, e)[0];
    seen.insert(std::set<std::size_t>(p.sentence_ids_a.begin(), p.sentence_ids_a.end()));
  }
  EXPECT_GE(seen.size(), 2U);
  EXPECT_LE(seen.size(), 20U);
}

TEST(ShuffleDivideEpoch, ThreadCountDoesNotChangeDraws) {
  Corpus c;
  for (std::size_t m = 2; m < 40; ++m) c.documents.push_back(doc_with(m));
  const auto serial = shuffle_divide_epoch(c, 4, 2);
  setenv("SADCLUSTER_THREADS", "4", 1);
  const auto parallel = shuffle_divide_epoch(c, 4, 2);
  unsetenv("SADCLUSTER_THREADS");
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(serial[i].view_a, parallel[i].view_a);
    EXPECT_EQ(serial[i].view_b, parallel[i].view_b);
  }
}

TEST(ParallelFor, RethrowsLowestRangeError) {
  try {
    parallel_for(100, [](std::size_t i) {
      if (i == 30 || i == 90) throw Error(ErrorCode::kNumeric, "at " + std::to_string(i));
    }, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "at 30");
  }
}

}  // namespace
}  // namespace sadcluster
