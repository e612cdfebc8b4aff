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

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/text.hpp"

namespace sadcluster {

struct SparseVector {
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> values;
  std::size_t dim = 0;

  std::size_t nnz() const noexcept { return indices.size(); }
  // All-OOV documents transform to a vector with empty support.
  bool is_zero() const noexcept { return indices.empty(); }
};

// Smoothed TF-IDF: idf(t) = ln((1 + N) / (1 + df(t))) + 1.
struct TfIdfModel {
  std::unordered_map<std::string, std::size_t> vocabulary;
  std::vector<std::string> terms;  // index -> token, sorted
  std::vector<std::size_t> df;
  std::vector<double> idf;
  std::size_t num_docs = 0;

  std::size_t dim() const noexcept { return terms.size(); }
};

inline TfIdfModel fit_tfidf(const Corpus& corpus) {
  require(!corpus.empty(), "fit_tfidf needs a non-empty corpus");
  std::map<std::string, std::size_t> doc_freq;
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus.documents) {
    auto tokens = word_tokens(doc.text);
    total_tokens += tokens.size();
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++doc_freq[std::move(t)];
  }
  if (total_tokens == 0) fail(ErrorCode::kInvalidArgument, "corpus contains no tokens");

  TfIdfModel model;
  model.num_docs = corpus.size();
  const double n = static_cast<double>(model.num_docs);
  for (auto& [term, count] : doc_freq) {
    model.vocabulary.emplace(term, model.terms.size());
    model.terms.push_back(term);
    model.df.push_back(count);
    model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

// tf * idf, L2-normalized. Out-of-vocabulary tokens are ignored.
inline SparseVector transform(const TfIdfModel& model, std::string_view text) {
  std::map<std::size_t, std::size_t> tf;
  for (const auto& token : word_tokens(text)) {
    const auto it = model.vocabulary.find(token);
    if (it != model.vocabulary.end()) ++tf[it->second];
  }
  SparseVector v;
  v.dim = model.dim();
  for (const auto& [index, count] : tf) {
    v.indices.push_back(index);
    v.values.push_back(static_cast<double>(count) * model.idf[index]);
  }
  normalize_in_place(v.values);
  return v;
}

inline SparseVector transform(const TfIdfModel& model, const Document& doc) {
  return transform(model, doc.text);
}

inline std::vector<SparseVector> transform_corpus(const TfIdfModel& model, const Corpus& corpus) {
  std::vector<SparseVector> out(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) { out[i] = transform(model, corpus.documents[i]); });
  return out;
}

// Cosine similarity; 0 when either side has zero norm.
inline double cosine_similarity(const SparseVector& a, const SparseVector& b) {
  double num = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    if (a.indices[i] == b.indices[j]) {
      num += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const double den = l2_norm(a.values) * l2_norm(b.values);
  return den > 0.0 ? num / den : 0.0;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine_similarity: dimension mismatch");
  const double den = l2_norm(a) * l2_norm(b);
  return den > 0.0 ? dot(a, b) / den : 0.0;
}

inline Matrix similarity_matrix(std::span<const SparseVector> vectors) {
  const std::size_t n = vectors.size();
  Matrix s(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = cosine_similarity(vectors[i], vectors[j]);
  });
  return s;
}

// Pairwise cosine similarity of the rows of `embeddings`.
inline Matrix similarity_matrix(const Matrix& embeddings) {
  const Matrix unit = normalized_rows(embeddings);
  const std::size_t n = unit.rows();
  Matrix s(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = dot(unit.row(i), unit.row(j));
  });
  return s;
}

struct PositivePairing {
  std::vector<std::size_t> partner;
  std::vector<double> similarity;

  std::size_t size() const noexcept { return partner.size(); }
};

// partner[n] = argmax over m != n of similarity(n, m); ties go to the
// smallest m.
inline PositivePairing top1_from_similarity(const Matrix& similarity) {
  const std::size_t n = similarity.rows();
  require(similarity.cols() == n, "similarity matrix must be square");
  require(n >= 2, "positive sampling needs at least 2 documents");
  PositivePairing pairing;
  pairing.partner.resize(n);
  pairing.similarity.resize(n);
  parallel_for(n, [&](std::size_t i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = best + 1; j < n; ++j) {
      if (j != i && similarity(i, j) > similarity(i, best)) best = j;
    }
    pairing.partner[i] = best;
    pairing.similarity[i] = similarity(i, best);
  });
  return pairing;
}

inline PositivePairing top1_positive_sampling(std::span<const SparseVector> vectors) {
  require(vectors.size() >= 2, "positive sampling needs at least 2 documents");
  return top1_from_similarity(similarity_matrix(vectors));
}

inline PositivePairing top1_positive_sampling(const Matrix& embeddings) {
  require(embeddings.rows() >= 2, "positive sampling needs at least 2 documents");
  return top1_from_similarity(similarity_matrix(embeddings));
}

// alpha^(epoch-1) * sim_tfidf + (1 - alpha^(epoch-1)) * sim_model.
inline Matrix blended_similarity(const Matrix& sim_tfidf, const Matrix& sim_model, double alpha,
                                 std::size_t epoch) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(epoch >= 1, "epochs are numbered from 1");
  if (sim_tfidf.rows() != sim_model.rows() || sim_tfidf.cols() != sim_model.cols()) {
    fail(ErrorCode::kInvalidArgument, "blended_similarity: shape mismatch");
  }
  // alpha^0 = 1 exactly; return the TF-IDF matrix untouched so that signed
  // zeros survive.
  if (epoch == 1) return sim_tfidf;
  const double w = std::pow(alpha, static_cast<double>(epoch - 1));
  Matrix out(sim_tfidf.rows(), sim_tfidf.cols());
  auto dst = out.flat();
  auto a = sim_tfidf.flat();
  auto b = sim_model.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w * a[i] + (1.0 - w) * b[i];
  return out;
}

// Diagnostic only: share of documents whose partner carries the same gold
// label. Never feeds back into training.
inline double label_match_rate(const PositivePairing& pairing,
                               std::span<const std::optional<int>> labels) {
  require(labels.size() == pairing.size(), "label_match_rate: length mismatch");
  require(pairing.size() > 0, "label_match_rate: empty pairing");
  std::size_t matches = 0;
  for (std::size_t n = 0; n < pairing.size(); ++n) {
    const auto& mine = labels[n];
    const auto& theirs = labels[pairing.partner[n]];
    if (!mine || !theirs) {
      fail(ErrorCode::kInvalidArgument, "label_match_rate: document " + std::to_string(n) +
                                            " or its partner is unlabeled");
    }
    if (*mine == *theirs) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(pairing.size());
}

inline std::vector<std::optional<int>> corpus_labels(const Corpus& corpus) {
  std::vector<std::optional<int>> labels;
  labels.reserve(corpus.size());
  for (const auto& d : corpus.documents) labels.push_back(d.label);
  return labels;
}

inline nlohmann::json sparse_vector_to_json(const std::string& id, const SparseVector& v) {
  return {{"id", id}, {"indices", v.indices}, {"values", v.values}};
}

}  // namespace sadcluster
