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

// Subcommand implementations behind the sadcluster CLI. Each command reads
// and writes files only; the executable just parses flags.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/augment.hpp"
#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/encoder.hpp"
#include "sadcluster/kmeans.hpp"
#include "sadcluster/metrics.hpp"
#include "sadcluster/synth.hpp"
#include "sadcluster/tfidf.hpp"
#include "sadcluster/train.hpp"

namespace sadcluster::cli {

namespace fs = std::filesystem;

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- synth

inline void cmd_synth(const SynthConfig& config, const fs::path& output) {
  const Corpus corpus = generate_synthetic_corpus(config);
  auto out = open_output(output);
  write_jsonl_corpus(corpus, out);
}

// ----------------------------------------------------------- preprocess

enum class Profile { kNone, kNewsgroup, kReuters };

inline Profile parse_profile(std::string_view name) {
  if (name == "none") return Profile::kNone;
  if (name == "newsgroup") return Profile::kNewsgroup;
  if (name == "reuters") return Profile::kReuters;
  fail(ErrorCode::kInvalidArgument, "unknown preprocessing profile '" + std::string(name) + "'");
}

struct PreprocessOptions {
  fs::path input;
  CorpusFormat format = CorpusFormat::kJsonl;
  Profile profile = Profile::kNone;
  std::size_t min_words = 10;
  std::size_t top_k_classes = 10;
  std::size_t min_sentences = 1;
  fs::path output;
  std::optional<fs::path> stats;
};

inline nlohmann::json histogram_json(const Corpus& corpus) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [label, count] : class_histogram(corpus)) {
    const auto idx = static_cast<std::size_t>(label);
    const std::string key =
        idx < corpus.label_names.size() ? corpus.label_names[idx] : std::to_string(label);
    hist[key] = count;
  }
  return hist;
}

inline nlohmann::json cmd_preprocess(const PreprocessOptions& options) {
  const Corpus raw = load_corpus(options.input, options.format);
  Corpus cleaned;
  switch (options.profile) {
    case Profile::kNone: cleaned = raw; break;
    case Profile::kNewsgroup: cleaned = preprocess_newsgroup_style(raw, options.min_words); break;
    case Profile::kReuters: cleaned = preprocess_reuters_style(raw, options.top_k_classes); break;
  }
  if (options.min_sentences > 1) cleaned = filter_min_sentences(cleaned, options.min_sentences);
  {
    auto out = open_output(options.output);
    write_jsonl_corpus(cleaned, out, /*with_sentences=*/true);
  }
  nlohmann::json stats = {{"schema_version", kMetricsSchemaVersion},
                          {"documents_before", raw.size()},
                          {"documents_after", cleaned.size()},
                          {"classes_before", histogram_json(raw)},
                          {"classes_after", histogram_json(cleaned)},
                          {"label_names", cleaned.label_names}};
  if (options.stats) write_json(*options.stats, stats);
  return stats;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  fs::path input;
  CorpusFormat format = CorpusFormat::kJsonl;
  TrainConfig config;
  // Documents with fewer sentences are dropped before training; SaD needs 2.
  std::size_t min_sentences = 4;
  fs::path out_dir;
  bool dump_pairs = false;
  bool dump_tfidf = false;
};

inline nlohmann::json cmd_train(const TrainOptions& options) {
  Corpus corpus = load_corpus(options.input, options.format);
  if (options.min_sentences > 1) corpus = filter_min_sentences(corpus, options.min_sentences);
  fs::create_directories(options.out_dir);

  if (options.dump_tfidf) {
    const TfIdfModel model = fit_tfidf(corpus);
    auto out = open_output(options.out_dir / "tfidf.jsonl");
    for (const auto& doc : corpus.documents) {
      out << sparse_vector_to_json(doc.id, transform(model, doc)).dump() << '\n';
    }
  }

  std::optional<std::ofstream> pairs_out;
  if (options.dump_pairs) pairs_out = open_output(options.out_dir / "pairs.jsonl");
  std::unordered_map<std::string, std::size_t> index_of;
  TrainHooks hooks;
  if (pairs_out) {
    hooks.on_pairing = [&](std::size_t epoch, const PositivePairing& pairing) {
      for (std::size_t n = 0; n < pairing.size(); ++n) {
        *pairs_out << nlohmann::json{{"epoch", epoch},
                                     {"n", n},
                                     {"m", pairing.partner[n]},
                                     {"sim", pairing.similarity[n]}}
                          .dump()
                   << '\n';
      }
    };
    if (options.config.method == Method::kSad) {
      for (std::size_t i = 0; i < corpus.size(); ++i) index_of[corpus.documents[i].id] = i;
      hooks.on_batch = [&](std::size_t epoch, const ContrastiveBatch& batch) {
        for (std::size_t i = 0; i < batch.num_pairs(); ++i) {
          const std::string& id = batch.source_ids[2 * i];
          Rng rng = shuffle_divide_stream(options.config.seed, epoch, id);
          nlohmann::json j =
              view_pair_to_json(shuffle_divide(corpus.documents[index_of.at(id)], rng));
          j["epoch"] = epoch;
          *pairs_out << j.dump() << '\n';
        }
      };
    }
  }

  const TrainResult result = train(corpus, options.config, hooks);
  EncoderCheckpoint ckpt{result.vocab, result.best_params, options.config.max_len_train,
                         options.config.max_len_test};
  save_checkpoint(options.out_dir / "checkpoint.json", ckpt);
  nlohmann::json metrics = history_to_json(result, options.config);
  metrics["documents"] = corpus.size();
  write_json(options.out_dir / "metrics.json", metrics);
  return metrics;
}

// ---------------------------------------------------------------- embed

struct EmbedOptions {
  fs::path checkpoint;
  fs::path input;
  CorpusFormat format = CorpusFormat::kJsonl;
  std::size_t max_len = 0;  // 0 = the checkpoint's test length
  std::size_t min_sentences = 1;
  fs::path output;
};

inline void cmd_embed(const EmbedOptions& options) {
  const EncoderCheckpoint ckpt = load_checkpoint(options.checkpoint);
  Corpus corpus = load_corpus(options.input, options.format);
  if (options.min_sentences > 1) corpus = filter_min_sentences(corpus, options.min_sentences);
  const std::size_t max_len = options.max_len > 0 ? options.max_len : ckpt.max_len_test;
  const Matrix embeddings = embed_corpus(ckpt.params, ckpt.vocab, corpus, max_len);
  std::vector<std::string> ids;
  for (const auto& d : corpus.documents) ids.push_back(d.id);
  auto out = open_output(options.output);
  write_embeddings(out, ids, embeddings);
}

// -------------------------------------------------------------- cluster

struct ClusterOptions {
  fs::path embeddings;
  KMeansOptions kmeans;
  fs::path output;
};

inline nlohmann::json cmd_cluster(const ClusterOptions& options) {
  const ExternalEmbeddings emb = ExternalEmbeddings::load(options.embeddings);
  const ClusterModel model = spherical_kmeans(emb.values(), options.kmeans);
  auto out = open_output(options.output);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << nlohmann::json{{"id", emb.ids()[i]}, {"cluster", model.assignments[i]}}.dump() << '\n';
  }
  return {{"k", model.k()},
          {"objective", model.objective},
          {"iterations", model.iterations_run},
          {"restarts", options.kmeans.restarts},
          {"seed", options.kmeans.seed}};
}

// ----------------------------------------------------------------- eval

struct EvalOptions {
  fs::path assignments;
  fs::path corpus;
  CorpusFormat format = CorpusFormat::kJsonl;
  std::optional<fs::path> embeddings;
  std::size_t silhouette_cap = 2000;
  std::uint64_t seed = 0;
  std::optional<fs::path> output;
};

inline std::unordered_map<std::string, int> read_assignments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::unordered_map<std::string, int> clusters;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      clusters[j.at("id").get<std::string>()] = j.at("cluster").get<int>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return clusters;
}

// Scores every labeled document that has an assignment; all of them must.
inline nlohmann::json cmd_eval(const EvalOptions& options) {
  const auto clusters_by_id = read_assignments(options.assignments);
  const Corpus corpus = load_corpus(options.corpus, options.format);
  std::vector<int> labels;
  std::vector<int> clusters;
  std::vector<std::string> ids;
  for (const auto& doc : corpus.documents) {
    const auto it = clusters_by_id.find(doc.id);
    if (it == clusters_by_id.end()) continue;
    if (!doc.label) fail(ErrorCode::kInvalidArgument, "document '" + doc.id + "' has no label");
    labels.push_back(*doc.label);
    clusters.push_back(it->second);
    ids.push_back(doc.id);
  }
  if (ids.size() != clusters_by_id.size()) {
    fail(ErrorCode::kNotFound, "some assigned ids are missing from the corpus");
  }
  std::optional<Matrix> embeddings;
  if (options.embeddings) {
    const ExternalEmbeddings emb = ExternalEmbeddings::load(*options.embeddings);
    Matrix m(ids.size(), emb.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto row = emb.at(ids[i]);
      std::copy(row.begin(), row.end(), m.row(i).begin());
    }
    embeddings = std::move(m);
  }
  const EvalReport report = evaluate(labels, clusters, embeddings ? &*embeddings : nullptr,
                                     options.silhouette_cap, options.seed);
  nlohmann::json j = report_to_json(report);
  j["documents"] = ids.size();
  if (options.output) write_json(*options.output, j);
  return j;
}

}  // namespace sadcluster::cli
