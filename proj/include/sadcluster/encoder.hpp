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
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/rng.hpp"
#include "sadcluster/text.hpp"

namespace sadcluster {

using TokenId = std::int32_t;
using Embedding = std::vector<double>;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {
    index_.emplace(tokens_[0], kPad);
    index_.emplace(tokens_[1], kUnk);
  }

  // Rebuilds from a full token list whose first two entries are the specials.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) fail(ErrorCode::kParse, "vocabulary is missing its special tokens");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        fail(ErrorCode::kParse, "duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  void add(const std::string& token) {
    if (index_.emplace(token, static_cast<TokenId>(tokens_.size())).second) {
      tokens_.push_back(token);
    }
  }

  TokenId id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Keeps the `max_vocab` most frequent tokens; equal counts are ordered
// lexicographically.
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t max_vocab) {
  require(!corpus.empty(), "build_vocab needs a non-empty corpus");
  require(max_vocab >= 1, "max_vocab must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus.documents) {
    for (auto& t : word_tokens(doc.text)) ++counts[std::move(t)];
  }
  if (counts.empty()) fail(ErrorCode::kInvalidArgument, "corpus contains no tokens");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);
  Vocabulary vocab;
  for (const auto& [token, count] : ranked) vocab.add(token);
  return vocab;
}

struct TokenSequence {
  std::vector<TokenId> ids;  // always max_len long; padding only as suffix
  std::size_t length = 0;    // non-pad prefix
  std::size_t max_len = 0;
};

// Truncates to the first `max_len` tokens, maps OOV to <unk>, pads to max_len.
inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  require(max_len >= 1, "max_len must be at least 1");
  TokenSequence seq;
  seq.max_len = max_len;
  seq.ids.reserve(max_len);
  for (const auto& token : word_tokens(text)) {
    if (seq.ids.size() == max_len) break;
    seq.ids.push_back(vocab.id(token));
  }
  seq.length = seq.ids.size();
  seq.ids.resize(max_len, Vocabulary::kPad);
  return seq;
}

struct EncoderConfig {
  std::size_t dim = 64;         // embedding width
  std::size_t output_dim = 64;  // width after projection
  bool projection = true;
};

// Embedding table, optionally followed by tanh(h * projection + bias).
struct EncoderParams {
  Matrix embedding;   // V x d
  Matrix projection;  // d x d' (empty without projection)
  std::vector<double> bias;
  bool has_projection = false;

  std::size_t vocab_size() const noexcept { return embedding.rows(); }
  std::size_t input_dim() const noexcept { return embedding.cols(); }
  std::size_t output_dim() const noexcept {
    return has_projection ? projection.cols() : embedding.cols();
  }

  // Same shapes, all zeros. Used as a gradient accumulator.
  EncoderParams zeros_like() const {
    EncoderParams z;
    z.embedding = Matrix(embedding.rows(), embedding.cols());
    z.projection = Matrix(projection.rows(), projection.cols());
    z.bias.assign(bias.size(), 0.0);
    z.has_projection = has_projection;
    return z;
  }

  void set_zero() {
    embedding.fill(0.0);
    projection.fill(0.0);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  // Parameter tensors in a fixed order, for optimizers.
  std::vector<std::span<double>> tensors() {
    std::vector<std::span<double>> t{embedding.flat()};
    if (has_projection) {
      t.push_back(projection.flat());
      t.push_back(bias);
    }
    return t;
  }

  bool finite() const {
    return all_finite(embedding.flat()) && all_finite(projection.flat()) && all_finite(bias);
  }

  bool operator==(const EncoderParams&) const = default;
};

// Embedding rows ~ U(-0.05, 0.05); projection Xavier-uniform; bias zero.
inline EncoderParams init_encoder(std::size_t vocab_size, const EncoderConfig& config,
                                  std::uint64_t seed) {
  require(vocab_size >= 2, "vocabulary must contain the special tokens");
  require(config.dim >= 1 && config.output_dim >= 1, "encoder dimensions must be positive");
  EncoderParams p;
  Rng rng = make_stream(seed, "encoder_init");
  p.embedding = Matrix(vocab_size, config.dim);
  for (double& x : p.embedding.flat()) x = rng.uniform(-0.05, 0.05);
  p.has_projection = config.projection;
  if (config.projection) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(config.dim + config.output_dim));
    p.projection = Matrix(config.dim, config.output_dim);
    for (double& x : p.projection.flat()) x = rng.uniform(-limit, limit);
    p.bias.assign(config.output_dim, 0.0);
  }
  return p;
}

// Intermediate values kept for the backward pass.
struct EncodeTrace {
  std::vector<double> pooled;
  Embedding output;
};

inline EncodeTrace encode_traced(const EncoderParams& params, const TokenSequence& seq) {
  if (seq.length == 0) fail(ErrorCode::kInvalidArgument, "cannot encode an all-pad sequence");
  const std::size_t d = params.input_dim();
  EncodeTrace trace;
  trace.pooled.assign(d, 0.0);
  for (std::size_t t = 0; t < seq.length; ++t) {
    const auto id = static_cast<std::size_t>(seq.ids[t]);
    if (id >= params.vocab_size()) fail(ErrorCode::kInvalidArgument, "token id out of range");
    const auto row = params.embedding.row(id);
    for (std::size_t k = 0; k < d; ++k) trace.pooled[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(seq.length);
  for (double& x : trace.pooled) x *= inv;

  if (!params.has_projection) {
    trace.output = trace.pooled;
    return trace;
  }
  const std::size_t out_dim = params.output_dim();
  trace.output = params.bias;
  for (std::size_t k = 0; k < d; ++k) {
    const double h = trace.pooled[k];
    const auto prow = params.projection.row(k);
    for (std::size_t j = 0; j < out_dim; ++j) trace.output[j] += h * prow[j];
  }
  for (double& x : trace.output) x = std::tanh(x);
  return trace;
}

// Mean of the embedding rows of the non-pad tokens, then the optional
// projection. Invariant to token order and to the amount of padding.
inline Embedding encode(const EncoderParams& params, const TokenSequence& seq) {
  return encode_traced(params, seq).output;
}

inline Matrix encode_batch(const EncoderParams& params, std::span<const TokenSequence> seqs) {
  Matrix out(seqs.size(), params.output_dim());
  parallel_for(seqs.size(), [&](std::size_t i) {
    try {
      const Embedding e = encode(params, seqs[i]);
      std::copy(e.begin(), e.end(), out.row(i).begin());
    } catch (const Error& err) {
      throw Error(err.code(), "sequence " + std::to_string(i) + ": " + err.what());
    }
  });
  return out;
}

// Adds d(loss)/d(params) to `grads` given d(loss)/d(output) for one sequence.
inline void accumulate_encoder_gradient(const EncoderParams& params, const TokenSequence& seq,
                                        const EncodeTrace& trace,
                                        std::span<const double> grad_output,
                                        EncoderParams& grads) {
  const std::size_t d = params.input_dim();
  std::vector<double> grad_pooled(d, 0.0);
  if (params.has_projection) {
    const std::size_t out_dim = params.output_dim();
    std::vector<double> grad_pre(out_dim);
    for (std::size_t j = 0; j < out_dim; ++j) {
      const double y = trace.output[j];
      grad_pre[j] = grad_output[j] * (1.0 - y * y);
      grads.bias[j] += grad_pre[j];
    }
    for (std::size_t k = 0; k < d; ++k) {
      const auto prow = params.projection.row(k);
      auto grow = grads.projection.row(k);
      const double h = trace.pooled[k];
      double acc = 0.0;
      for (std::size_t j = 0; j < out_dim; ++j) {
        grow[j] += h * grad_pre[j];
        acc += prow[j] * grad_pre[j];
      }
      grad_pooled[k] = acc;
    }
  } else {
    std::copy(grad_output.begin(), grad_output.end(), grad_pooled.begin());
  }
  const double inv = 1.0 / static_cast<double>(seq.length);
  for (std::size_t t = 0; t < seq.length; ++t) {
    auto grow = grads.embedding.row(static_cast<std::size_t>(seq.ids[t]));
    for (std::size_t k = 0; k < d; ++k) grow[k] += grad_pooled[k] * inv;
  }
}

// Precomputed document vectors, e.g. from a transformer run out of process.
// File format: a "dim=<d>" header, then "<id> <d floats>" per line.
class ExternalEmbeddings {
 public:
  ExternalEmbeddings() = default;
  ExternalEmbeddings(std::vector<std::string> ids, Matrix values)
      : ids_(std::move(ids)), values_(std::move(values)) {
    require(ids_.size() == values_.rows(), "embedding ids and rows differ in count");
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second) {
        fail(ErrorCode::kParse, "duplicate embedding id '" + ids_[i] + "'");
      }
    }
  }

  static ExternalEmbeddings read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::kParse, "embedding file is empty");
    const std::string_view header = trim(line);
    if (!header.starts_with("dim=")) {
      fail(ErrorCode::kParse, "embedding file must start with 'dim=<d>'");
    }
    const long dim = std::strtol(std::string(header.substr(4)).c_str(), nullptr, 10);
    if (dim <= 0) fail(ErrorCode::kParse, "invalid embedding dimension in header");
    const auto d = static_cast<std::size_t>(dim);

    std::vector<std::string> ids;
    std::vector<double> flat;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream fields(line);
      std::string id;
      fields >> id;
      std::size_t count = 0;
      std::string token;
      while (fields >> token) {
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0') {
          fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": bad number '" + token + "'");
        }
        flat.push_back(v);
        ++count;
      }
      if (count != d) {
        fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected " +
                                    std::to_string(d) + " values for '" + id + "', found " +
                                    std::to_string(count));
      }
      ids.push_back(std::move(id));
    }
    Matrix values(ids.size(), d);
    std::copy(flat.begin(), flat.end(), values.flat().begin());
    return ExternalEmbeddings(std::move(ids), std::move(values));
  }

  static ExternalEmbeddings load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
    return read(in);
  }

  std::size_t dim() const noexcept { return values_.cols(); }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& values() const noexcept { return values_; }

  std::span<const double> at(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) fail(ErrorCode::kNotFound, "no embedding for id '" + id + "'");
    return values_.row(it->second);
  }

  // Rows in corpus order.
  Matrix gather(const Corpus& corpus) const {
    Matrix out(corpus.size(), dim());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto row = at(corpus.documents[i].id);
      std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
  }

 private:
  std::vector<std::string> ids_;
  Matrix values_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void write_embeddings(std::ostream& out, std::span<const std::string> ids,
                             const Matrix& values) {
  require(ids.size() == values.rows(), "embedding ids and rows differ in count");
  out << "dim=" << values.cols() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (double v : values.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

// Everything needed to re-embed documents after training.
struct EncoderCheckpoint {
  Vocabulary vocab;
  EncoderParams params;
  std::size_t max_len_train = 128;
  std::size_t max_len_test = 256;
};

namespace detail {

inline nlohmann::json tensor_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}},
          {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
}

inline Matrix tensor_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] * shape[1] != data.size()) {
    fail(ErrorCode::kParse, "checkpoint tensor shape does not match its data");
  }
  Matrix m(shape[0], shape[1]);
  std::copy(data.begin(), data.end(), m.flat().begin());
  return m;
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_to_json(const EncoderCheckpoint& ckpt) {
  nlohmann::json tensors;
  tensors["embedding"] = detail::tensor_to_json(ckpt.params.embedding);
  if (ckpt.params.has_projection) {
    tensors["projection"] = detail::tensor_to_json(ckpt.params.projection);
    tensors["bias"] = ckpt.params.bias;
  }
  return {{"format", "sadcluster-encoder"},
          {"version", kCheckpointVersion},
          {"vocab", ckpt.vocab.tokens()},
          {"has_projection", ckpt.params.has_projection},
          {"max_len_train", ckpt.max_len_train},
          {"max_len_test", ckpt.max_len_test},
          {"tensors", tensors}};
}

inline EncoderCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "sadcluster-encoder") fail(ErrorCode::kParse, "not an encoder checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      fail(ErrorCode::kParse, "unsupported checkpoint version");
    }
    EncoderCheckpoint ckpt{Vocabulary(j.at("vocab").get<std::vector<std::string>>()), {}, 0, 0};
    ckpt.max_len_train = j.at("max_len_train").get<std::size_t>();
    ckpt.max_len_test = j.at("max_len_test").get<std::size_t>();
    const auto& tensors = j.at("tensors");
    ckpt.params.embedding = detail::tensor_from_json(tensors.at("embedding"));
    ckpt.params.has_projection = j.at("has_projection").get<bool>();
    if (ckpt.params.has_projection) {
      ckpt.params.projection = detail::tensor_from_json(tensors.at("projection"));
      ckpt.params.bias = tensors.at("bias").get<std::vector<double>>();
      if (ckpt.params.projection.rows() != ckpt.params.embedding.cols() ||
          ckpt.params.bias.size() != ckpt.params.projection.cols()) {
        fail(ErrorCode::kParse, "checkpoint projection shape is inconsistent");
      }
    }
    if (ckpt.params.embedding.rows() != ckpt.vocab.size()) {
      fail(ErrorCode::kParse, "checkpoint embedding rows do not match the vocabulary");
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const EncoderCheckpoint& ckpt) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

inline EncoderCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

// Tokenizes and encodes every document of `corpus` at `max_len`.
inline Matrix embed_corpus(const EncoderParams& params, const Vocabulary& vocab,
                           const Corpus& corpus, std::size_t max_len) {
  std::vector<TokenSequence> seqs(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    seqs[i] = tokenize(corpus.documents[i].text, vocab, max_len);
  });
  try {
    return encode_batch(params, seqs);
  } catch (const Error& e) {
    fail(e.code(), std::string("embedding corpus: ") + e.what());
  }
}

}  // namespace sadcluster
