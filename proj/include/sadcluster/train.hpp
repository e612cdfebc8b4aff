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
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/augment.hpp"
#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/encoder.hpp"
#include "sadcluster/kmeans.hpp"
#include "sadcluster/metrics.hpp"
#include "sadcluster/nt_xent.hpp"
#include "sadcluster/optim.hpp"
#include "sadcluster/rng.hpp"
#include "sadcluster/tfidf.hpp"

namespace sadcluster {

enum class Method { kSad, kTps };

inline Method parse_method(std::string_view name) {
  if (name == "sad") return Method::kSad;
  if (name == "tps") return Method::kTps;
  fail(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "'");
}

inline std::string_view method_name(Method m) { return m == Method::kSad ? "sad" : "tps"; }

struct TrainConfig {
  Method method = Method::kSad;
  std::size_t batch_size = 320;
  double temperature = 0.5;
  OptimizerConfig optimizer{};
  // Unset: ceil(n / batch_size) for SaD, 3 for TPS.
  std::optional<std::size_t> epochs;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_len_train = 128;
  std::size_t max_len_test = 256;
  EncoderConfig encoder{};
  std::size_t max_vocab = 30000;
  // Clusters used for per-epoch model selection; 0 takes corpus.num_classes.
  std::size_t k = 0;
  std::size_t kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  std::size_t kmeans_restarts = 10;
  std::size_t silhouette_cap = 2000;
};

inline std::size_t default_epochs(Method method, std::size_t dataset_size, std::size_t batch_size) {
  if (method == Method::kTps) return 3;
  return std::max<std::size_t>(1, (dataset_size + batch_size - 1) / batch_size);
}

inline void validate(const TrainConfig& config) {
  require(config.batch_size >= 2, "batch size must be at least 2");
  require(config.temperature > 0.0, "temperature must be positive");
  require(config.optimizer.learning_rate > 0.0, "learning rate must be positive");
  require(config.alpha >= 0.0 && config.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(config.max_len_train >= 1 && config.max_len_test >= 1, "max lengths must be positive");
  require(!config.epochs || *config.epochs >= 1, "epochs must be positive");
}

// Views 2i and 2i+1 form the i-th positive pair.
struct ContrastiveBatch {
  std::vector<TokenSequence> views;
  std::vector<std::string> source_ids;

  std::size_t num_pairs() const noexcept { return views.size() / 2; }
};

// Shuffle & Divide every document and tokenize both halves. The split for a
// document depends only on (seed, epoch, document id).
inline ContrastiveBatch build_batch_sad(std::span<const Document* const> docs,
                                        std::uint64_t seed, std::size_t epoch,
                                        const Vocabulary& vocab, std::size_t max_len_train) {
  ContrastiveBatch batch;
  batch.views.resize(2 * docs.size());
  batch.source_ids.resize(2 * docs.size());
  parallel_for(docs.size(), [&](std::size_t i) {
    Rng rng = shuffle_divide_stream(seed, epoch, docs[i]->id);
    const DocumentViewPair pair = shuffle_divide(*docs[i], rng);
    batch.views[2 * i] = tokenize(pair.view_a, vocab, max_len_train);
    batch.views[2 * i + 1] = tokenize(pair.view_b, vocab, max_len_train);
    batch.source_ids[2 * i] = docs[i]->id;
    batch.source_ids[2 * i + 1] = docs[i]->id;
  });
  return batch;
}

// Pairs each anchor document with its TF-IDF (or blended) partner. No
// document may appear twice among the 2B views.
inline ContrastiveBatch build_batch_tps(const PositivePairing& pairing, const Corpus& corpus,
                                        std::span<const std::size_t> anchors,
                                        const Vocabulary& vocab, std::size_t max_len) {
  require(pairing.size() == corpus.size(), "pairing does not cover the corpus");
  std::unordered_set<std::size_t> used;
  for (std::size_t n : anchors) {
    require(n < corpus.size(), "anchor index out of range");
    const std::size_t m = pairing.partner[n];
    if (!used.insert(n).second || !used.insert(m).second) {
      fail(ErrorCode::kInvalidArgument,
           "build_batch_tps: document " + std::to_string(n) + " or its partner " +
               std::to_string(m) + " is already in the batch");
    }
  }
  ContrastiveBatch batch;
  batch.views.resize(2 * anchors.size());
  batch.source_ids.resize(2 * anchors.size());
  parallel_for(anchors.size(), [&](std::size_t i) {
    const Document& a = corpus.documents[anchors[i]];
    const Document& b = corpus.documents[pairing.partner[anchors[i]]];
    batch.views[2 * i] = tokenize(a.text, vocab, max_len);
    batch.views[2 * i + 1] = tokenize(b.text, vocab, max_len);
    batch.source_ids[2 * i] = a.id;
    batch.source_ids[2 * i + 1] = b.id;
  });
  return batch;
}

// Greedy batching of TPS anchors in `order`: an anchor whose document or
// partner is already taken waits for a later batch. Batches with fewer than
// two pairs are dropped.
inline std::vector<std::vector<std::size_t>> schedule_tps_batches(
    const PositivePairing& pairing, std::span<const std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> pending(order.begin(), order.end());
  while (!pending.empty()) {
    std::vector<std::size_t> batch;
    std::vector<std::size_t> deferred;
    std::unordered_set<std::size_t> used;
    for (std::size_t n : pending) {
      const std::size_t m = pairing.partner[n];
      if (batch.size() < batch_size && !used.contains(n) && !used.contains(m)) {
        batch.push_back(n);
        used.insert(n);
        used.insert(m);
      } else {
        deferred.push_back(n);
      }
    }
    if (batch.size() < 2) break;
    batches.push_back(std::move(batch));
    pending = std::move(deferred);
  }
  return batches;
}

// Forward + backward + optimizer update for one contrastive batch. Returns the
// batch loss.
inline double train_step(EncoderParams& params, EncoderParams& grads, OptimizerState& state,
                         const ContrastiveBatch& batch, const TrainConfig& config) {
  const std::size_t n = batch.views.size();
  std::vector<EncodeTrace> traces(n);
  parallel_for(n, [&](std::size_t i) { traces[i] = encode_traced(params, batch.views[i]); });
  Matrix embeddings(n, params.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(traces[i].output.begin(), traces[i].output.end(), embeddings.row(i).begin());
  }
  const NtXentResult loss = nt_xent(embeddings, config.temperature, true);
  if (!std::isfinite(loss.loss)) fail(ErrorCode::kNumeric, "non-finite contrastive loss");
  grads.set_zero();
  for (std::size_t i = 0; i < n; ++i) {
    accumulate_encoder_gradient(params, batch.views[i], traces[i], loss.gradient.row(i), grads);
  }
  const auto p = params.tensors();
  const auto g = grads.tensors();
  optimizer_step(p, g, config.optimizer, state);
  if (!params.finite()) fail(ErrorCode::kNumeric, "encoder parameters became non-finite");
  return loss.loss;
}

// Label-free quality of an encoder on a corpus, plus label-based scores when
// gold labels exist (reported only).
struct EncoderEvaluation {
  double silhouette = 0.0;
  double objective = 0.0;
  std::vector<std::size_t> assignments;
  std::optional<double> acc;
  std::optional<double> ami;
};

inline std::size_t resolve_k(const TrainConfig& config, const Corpus& corpus) {
  if (config.k > 0) return config.k;
  if (corpus.num_classes && *corpus.num_classes >= 2) {
    return static_cast<std::size_t>(*corpus.num_classes);
  }
  fail(ErrorCode::kInvalidArgument, "number of clusters k is required when the corpus is unlabeled");
}

inline KMeansOptions kmeans_options(const TrainConfig& config, std::size_t k) {
  return {k, config.seed, config.kmeans_max_iter, config.kmeans_tol, config.kmeans_restarts};
}

inline EncoderEvaluation evaluate_embeddings(const Matrix& embeddings, const Corpus& corpus,
                                             const TrainConfig& config, std::size_t k) {
  const ClusterModel model = spherical_kmeans(embeddings, kmeans_options(config, k));
  EncoderEvaluation eval;
  eval.assignments = model.assignments;
  eval.objective = model.objective;
  eval.silhouette =
      silhouette_score(embeddings, model.assignments, config.silhouette_cap, config.seed);
  const bool labeled = std::all_of(corpus.documents.begin(), corpus.documents.end(),
                                   [](const Document& d) { return d.label.has_value(); });
  if (labeled && !corpus.empty()) {
    const std::vector<int> labels = require_labels(corpus);
    const std::vector<int> clusters(model.assignments.begin(), model.assignments.end());
    eval.acc = clustering_accuracy(labels, clusters).acc;
    eval.ami = adjusted_mutual_information(labels, clusters);
  }
  return eval;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean batch loss
  std::vector<double> batch_losses;
  EncoderEvaluation eval;
  std::optional<double> positive_match_rate;  // TPS only, labeled corpora only
};

struct TrainResult {
  Vocabulary vocab;
  EncoderParams best_params;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  EncoderEvaluation initial;  // untrained encoder, for reference
};

// Called after each epoch; used by the CLI for progress and pair dumps.
struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::size_t epoch, const PositivePairing&)> on_pairing;
  std::function<void(std::size_t epoch, const ContrastiveBatch&)> on_batch;
};

// Contrastive training with per-epoch re-augmentation (SaD) or re-pairing
// (TPS), followed each epoch by clustering the full corpus at max_len_test.
// The parameters of the epoch with the highest silhouette are kept; ties go
// to the earliest epoch. Gold labels never influence training or selection.
inline TrainResult train(const Corpus& corpus, const TrainConfig& config,
                         const TrainHooks& hooks = {}) {
  validate(config);
  require(corpus.size() >= 2, "training needs at least 2 documents");
  const std::size_t k = resolve_k(config, corpus);
  const std::size_t epochs =
      config.epochs.value_or(default_epochs(config.method, corpus.size(), config.batch_size));
  if (config.method == Method::kSad) {
    for (const auto& d : corpus.documents) {
      if (d.sentences.size() < 2) {
        fail(ErrorCode::kInvalidArgument,
             "document '" + d.id + "' has fewer than 2 sentences; filter the corpus first");
      }
    }
  }

  TrainResult result;
  result.vocab = build_vocab(corpus, config.max_vocab);
  EncoderParams params = init_encoder(result.vocab.size(), config.encoder, config.seed);
  EncoderParams grads = params.zeros_like();
  OptimizerState state;

  Matrix embeddings = embed_corpus(params, result.vocab, corpus, config.max_len_test);
  result.initial = evaluate_embeddings(embeddings, corpus, config, k);
  result.best_params = params;

  Matrix tfidf_similarity;
  if (config.method == Method::kTps) {
    const TfIdfModel tfidf = fit_tfidf(corpus);
    const auto vectors = transform_corpus(tfidf, corpus);
    tfidf_similarity = similarity_matrix(vectors);
  }
  const auto labels = corpus_labels(corpus);
  const bool labeled = std::all_of(labels.begin(), labels.end(),
                                   [](const auto& l) { return l.has_value(); });

  double best_silhouette = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    std::vector<std::size_t> order = make_stream(config.seed, "epoch_order", epoch).permutation(corpus.size());

    std::vector<std::vector<std::size_t>> batches;
    std::optional<PositivePairing> pairing;
    if (config.method == Method::kTps) {
      const Matrix blended =
          epoch == 1 ? tfidf_similarity
                     : blended_similarity(tfidf_similarity, similarity_matrix(embeddings),
                                          config.alpha, epoch);
      pairing = top1_from_similarity(blended);
      if (labeled) record.positive_match_rate = label_match_rate(*pairing, labels);
      if (hooks.on_pairing) hooks.on_pairing(epoch, *pairing);
      batches = schedule_tps_batches(*pairing, order, config.batch_size);
    } else {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        if (end - start < 2) break;
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
    }

    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        ContrastiveBatch batch;
        if (config.method == Method::kTps) {
          batch = build_batch_tps(*pairing, corpus, batches[b], result.vocab, config.max_len_train);
        } else {
          std::vector<const Document*> docs;
          for (std::size_t i : batches[b]) docs.push_back(&corpus.documents[i]);
          batch = build_batch_sad(docs, config.seed, epoch, result.vocab, config.max_len_train);
        }
        if (hooks.on_batch) hooks.on_batch(epoch, batch);
        record.batch_losses.push_back(train_step(params, grads, state, batch, config));
      } catch (const Error& e) {
        fail(e.code(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " +
                           e.what());
      }
    }
    double total = 0.0;
    for (double l : record.batch_losses) total += l;
    record.loss = record.batch_losses.empty()
                      ? 0.0
                      : total / static_cast<double>(record.batch_losses.size());

    embeddings = embed_corpus(params, result.vocab, corpus, config.max_len_test);
    record.eval = evaluate_embeddings(embeddings, corpus, config, k);
    if (record.eval.silhouette > best_silhouette) {
      best_silhouette = record.eval.silhouette;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (hooks.on_epoch) hooks.on_epoch(record);
    result.history.push_back(std::move(record));
  }
  return result;
}

inline nlohmann::json evaluation_to_json(const EncoderEvaluation& e) {
  nlohmann::json j = {{"silhouette", e.silhouette}, {"objective", e.objective}};
  j["acc"] = e.acc ? nlohmann::json(*e.acc) : nlohmann::json(nullptr);
  j["ami"] = e.ami ? nlohmann::json(*e.ami) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json history_to_json(const TrainResult& result, const TrainConfig& config) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : result.history) {
    nlohmann::json e = {{"epoch", r.epoch}, {"loss", r.loss}, {"batch_losses", r.batch_losses}};
    e.update(evaluation_to_json(r.eval));
    if (r.positive_match_rate) e["positive_match_rate"] = *r.positive_match_rate;
    epochs.push_back(e);
  }
  return {{"schema_version", kMetricsSchemaVersion},
          {"method", method_name(config.method)},
          {"seed", config.seed},
          {"batch_size", config.batch_size},
          {"temperature", config.temperature},
          {"learning_rate", config.optimizer.learning_rate},
          {"alpha", config.alpha},
          {"max_len_train", config.max_len_train},
          {"max_len_test", config.max_len_test},
          {"kmeans_restarts", config.kmeans_restarts},
          {"silhouette_cap", config.silhouette_cap},
          {"best_epoch", result.best_epoch},
          {"initial", evaluation_to_json(result.initial)},
          {"history", epochs}};
}

// ---------------------------------------------------------------------------
// Supervised fine-tuning with a linear softmax head on top of the encoder.

struct FinetuneConfig {
  bool use_sad = false;
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer{OptimizerKind::kAdamW, 1e-3, 0.9, 0.999, 1e-8, 0.0};
  std::uint64_t seed = 0;
  std::size_t max_len_train = 128;
  std::size_t max_len_test = 256;
  std::size_t num_classes = 0;  // 0 = infer from the labels
};

struct FinetuneResult {
  EncoderParams encoder;
  Matrix head_weights;  // classes x d'
  std::vector<double> head_bias;
  std::vector<double> epoch_losses;
  double test_accuracy = 0.0;
};

namespace detail {

inline std::size_t argmax_class(const Matrix& w, std::span<const double> bias,
                                std::span<const double> x, std::vector<double>& logits) {
  logits.assign(w.rows(), 0.0);
  std::size_t best = 0;
  for (std::size_t c = 0; c < w.rows(); ++c) {
    logits[c] = bias[c] + dot(w.row(c), x);
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

}  // namespace detail

inline double classifier_accuracy(const EncoderParams& encoder, const Matrix& head_weights,
                                  std::span<const double> head_bias, const Vocabulary& vocab,
                                  const Corpus& corpus, std::size_t max_len) {
  const std::vector<int> labels = require_labels(corpus);
  require(!corpus.empty(), "classifier_accuracy: empty corpus");
  const Matrix emb = embed_corpus(encoder, vocab, corpus, max_len);
  std::size_t correct = 0;
  std::vector<double> logits;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t pred = detail::argmax_class(head_weights, head_bias, emb.row(i), logits);
    if (static_cast<int>(pred) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

// Cross-entropy training of head and encoder. With use_sad, every training
// document is replaced each epoch by one randomly chosen Shuffle & Divide
// half. Reports accuracy on `test`.
inline FinetuneResult supervised_finetune(EncoderParams params, const Vocabulary& vocab,
                                          const Corpus& train_corpus, const Corpus& test_corpus,
                                          const FinetuneConfig& config) {
  const std::vector<int> train_labels = require_labels(train_corpus);
  require_labels(test_corpus);
  require(!train_corpus.empty() && !test_corpus.empty(), "fine-tuning needs train and test data");
  require(config.batch_size >= 1, "batch size must be positive");
  std::size_t classes = config.num_classes;
  if (classes == 0) {
    int max_label = 0;
    for (int l : train_labels) max_label = std::max(max_label, l);
    for (const auto& d : test_corpus.documents) max_label = std::max(max_label, *d.label);
    classes = static_cast<std::size_t>(max_label) + 1;
  }
  require(classes >= 2, "fine-tuning needs at least 2 classes");

  FinetuneResult result;
  const std::size_t dim = params.output_dim();
  result.head_weights = Matrix(classes, dim);
  result.head_bias.assign(classes, 0.0);
  Rng init = make_stream(config.seed, "finetune_head");
  const double limit = std::sqrt(6.0 / static_cast<double>(classes + dim));
  for (double& w : result.head_weights.flat()) w = init.uniform(-limit, limit);

  EncoderParams grads = params.zeros_like();
  Matrix head_grad(classes, dim);
  std::vector<double> bias_grad(classes);
  OptimizerState state;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = make_stream(config.seed, "finetune_order", epoch).permutation(train_corpus.size());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t count = end - start;
      std::vector<TokenSequence> seqs(count);
      std::vector<EncodeTrace> traces(count);
      parallel_for(count, [&](std::size_t i) {
        const Document& doc = train_corpus.documents[order[start + i]];
        if (config.use_sad && doc.sentences.size() >= 2) {
          Rng rng = make_stream(config.seed, "finetune_sad", epoch, fnv1a(doc.id));
          const DocumentViewPair pair = shuffle_divide(doc, rng);
          seqs[i] = tokenize(rng.bernoulli(0.5) ? pair.view_b : pair.view_a, vocab,
                             config.max_len_train);
        } else {
          seqs[i] = tokenize(doc.text, vocab, config.use_sad ? config.max_len_train
                                                             : config.max_len_test);
        }
        traces[i] = encode_traced(params, seqs[i]);
      });

      grads.set_zero();
      head_grad.fill(0.0);
      std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(count);
      std::vector<double> logits;
      std::vector<double> grad_out(dim);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& x = traces[i].output;
        const auto label = static_cast<std::size_t>(train_labels[order[start + i]]);
        detail::argmax_class(result.head_weights, result.head_bias, x, logits);
        const double max_logit = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - max_logit);
        const double log_z = max_logit + std::log(sum);
        epoch_loss += (log_z - logits[label]) * inv;
        std::fill(grad_out.begin(), grad_out.end(), 0.0);
        for (std::size_t c = 0; c < classes; ++c) {
          const double g = (std::exp(logits[c] - log_z) - (c == label ? 1.0 : 0.0)) * inv;
          bias_grad[c] += g;
          const auto w = result.head_weights.row(c);
          auto hg = head_grad.row(c);
          for (std::size_t k = 0; k < dim; ++k) {
            hg[k] += g * x[k];
            grad_out[k] += g * w[k];
          }
        }
        accumulate_encoder_gradient(params, seqs[i], traces[i], grad_out, grads);
      }
      auto p = params.tensors();
      auto g = grads.tensors();
      p.push_back(result.head_weights.flat());
      p.push_back(result.head_bias);
      g.push_back(head_grad.flat());
      g.push_back(bias_grad);
      optimizer_step(p, g, config.optimizer, state);
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  result.test_accuracy = classifier_accuracy(params, result.head_weights, result.head_bias, vocab,
                                             test_corpus, config.max_len_test);
  result.encoder = std::move(params);
  return result;
}

// Seeded split; the first ceil(n * test_fraction) shuffled documents go to
// the test side.
inline std::pair<Corpus, Corpus> train_test_split(const Corpus& corpus, double test_fraction,
                                                  std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  const auto order = make_stream(seed, "split").permutation(corpus.size());
  const auto test_count = static_cast<std::size_t>(
      std::ceil(static_cast<double>(corpus.size()) * test_fraction));
  Corpus train_part;
  Corpus test_part;
  train_part.label_names = test_part.label_names = corpus.label_names;
  train_part.num_classes = test_part.num_classes = corpus.num_classes;
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_count), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  for (std::size_t i : train_idx) train_part.documents.push_back(corpus.documents[i]);
  for (std::size_t i : test_idx) test_part.documents.push_back(corpus.documents[i]);
  return {std::move(train_part), std::move(test_part)};
}

}  // namespace sadcluster
