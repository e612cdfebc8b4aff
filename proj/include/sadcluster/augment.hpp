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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/rng.hpp"
#include "sadcluster/text.hpp"

namespace sadcluster {

// Two half-documents cut from one shuffled document.
struct DocumentViewPair {
  std::string source_id;
  std::string view_a;
  std::string view_b;
  std::vector<std::size_t> sentence_ids_a;
  std::vector<std::size_t> sentence_ids_b;
};

// Shuffle & Divide: permute the sentences with Fisher-Yates, give the first
// ceil(m/2) shuffled sentences to view_a and the rest to view_b. Both views
// keep the shuffled order.
inline DocumentViewPair shuffle_divide(const Document& doc, Rng& rng) {
  const std::size_t m = doc.sentences.size();
  if (m < 2) {
    fail(ErrorCode::kInvalidArgument,
         "document '" + doc.id + "' has " + std::to_string(m) +
             " sentence(s); shuffle_divide needs at least 2");
  }
  const std::vector<std::size_t> order = rng.permutation(m);
  const std::size_t half = (m + 1) / 2;

  DocumentViewPair pair;
  pair.source_id = doc.id;
  pair.sentence_ids_a.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  pair.sentence_ids_b.assign(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  auto gather = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> parts;
    parts.reserve(ids.size());
    for (std::size_t id : ids) parts.push_back(doc.sentences[id]);
    return join(parts, " ");
  };
  pair.view_a = gather(pair.sentence_ids_a);
  pair.view_b = gather(pair.sentence_ids_b);
  return pair;
}

// Stream for one document in one epoch; independent of processing order.
inline Rng shuffle_divide_stream(std::uint64_t seed, std::size_t epoch, std::string_view doc_id) {
  return make_stream(seed, "shuffle_divide", epoch, fnv1a(doc_id));
}

// One view pair per document for the given epoch.
inline std::vector<DocumentViewPair> shuffle_divide_epoch(const Corpus& corpus,
                                                          std::uint64_t seed,
                                                          std::size_t epoch) {
  std::vector<DocumentViewPair> pairs(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    const Document& doc = corpus.documents[i];
    Rng rng = shuffle_divide_stream(seed, epoch, doc.id);
    pairs[i] = shuffle_divide(doc, rng);
  });
  return pairs;
}

inline nlohmann::json view_pair_to_json(const DocumentViewPair& pair) {
  return {{"id", pair.source_id},
          {"view_a", pair.view_a},
          {"view_b", pair.view_b},
          {"sentence_ids_a", pair.sentence_ids_a},
          {"sentence_ids_b", pair.sentence_ids_b}};
}

}  // namespace sadcluster
