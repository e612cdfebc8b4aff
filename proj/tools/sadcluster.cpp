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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sadcluster/commands.hpp"

namespace {

using namespace sadcluster;

int report_error(std::string_view code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised text clustering with contrastive document encoders"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "Worker threads (overrides SADCLUSTER_THREADS)")
      ->check(CLI::PositiveNumber);

  // synth
  SynthConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled topic-block corpus");
  synth_cmd->add_option("--topics", synth.topics, "Number of topics")->capture_default_str();
  synth_cmd->add_option("--docs-per-topic", synth.docs_per_topic)->capture_default_str();
  synth_cmd->add_option("--vocab-per-topic", synth.vocab_per_topic)->capture_default_str();
  synth_cmd->add_option("--sentences", synth.sentences_per_doc, "Sentences per document")
      ->capture_default_str();
  synth_cmd->add_option("--overlap", synth.overlap, "Share of content tokens from the shared pool")
      ->capture_default_str();
  synth_cmd->add_option("--function-word-rate", synth.function_word_rate)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("-o,--output", synth_out, "Output jsonl")->required();

  // preprocess
  cli::PreprocessOptions pre;
  std::string pre_format = "jsonl";
  std::string pre_profile = "none";
  std::string pre_stats;
  auto* pre_cmd = app.add_subcommand("preprocess", "Clean, split and filter a corpus");
  pre_cmd->add_option("-i,--input", pre.input)->required();
  pre_cmd->add_option("--format", pre_format, "jsonl or dir-per-class")->capture_default_str();
  pre_cmd->add_option("--profile", pre_profile, "newsgroup, reuters or none")->capture_default_str();
  pre_cmd->add_option("--min-words", pre.min_words)->capture_default_str();
  pre_cmd->add_option("--top-k-classes", pre.top_k_classes)->capture_default_str();
  pre_cmd->add_option("--min-sentences", pre.min_sentences)->capture_default_str();
  pre_cmd->add_option("-o,--output", pre.output)->required();
  pre_cmd->add_option("--stats", pre_stats, "Write document and class counts here");

  // train
  cli::TrainOptions tr;
  std::string tr_format = "jsonl";
  std::string tr_method = "sad";
  std::string tr_optimizer = "adamw";
  std::optional<std::size_t> tr_epochs;
  std::optional<std::size_t> tr_min_sentences;
  auto* tr_cmd = app.add_subcommand("train", "Contrastive training with per-epoch clustering");
  tr_cmd->add_option("-i,--input", tr.input)->required();
  tr_cmd->add_option("--format", tr_format)->capture_default_str();
  tr_cmd->add_option("--method", tr_method, "sad or tps")->capture_default_str();
  tr_cmd->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  tr_cmd->add_option("--lr", tr.config.optimizer.learning_rate)->capture_default_str();
  tr_cmd->add_option("--weight-decay", tr.config.optimizer.weight_decay)->capture_default_str();
  tr_cmd->add_option("--optimizer", tr_optimizer, "adamw or sgd")->capture_default_str();
  tr_cmd->add_option("--temperature", tr.config.temperature)->capture_default_str();
  tr_cmd->add_option("--alpha", tr.config.alpha)->capture_default_str();
  tr_cmd->add_option("--epochs", tr_epochs, "Default: ceil(n/B) for sad, 3 for tps");
  tr_cmd->add_option("--seed", tr.config.seed)->capture_default_str();
  tr_cmd->add_option("--max-len-train", tr.config.max_len_train)->capture_default_str();
  tr_cmd->add_option("--max-len-test", tr.config.max_len_test)->capture_default_str();
  tr_cmd->add_option("--dim", tr.config.encoder.dim)->capture_default_str();
  tr_cmd->add_option("--output-dim", tr.config.encoder.output_dim)->capture_default_str();
  tr_cmd->add_option("--max-vocab", tr.config.max_vocab)->capture_default_str();
  tr_cmd->add_option("--k", tr.config.k, "Clusters for model selection (0: from labels)")
      ->capture_default_str();
  tr_cmd->add_option("--max-iter", tr.config.kmeans_max_iter)->capture_default_str();
  tr_cmd->add_option("--tol", tr.config.kmeans_tol)->capture_default_str();
  tr_cmd->add_option("--restarts", tr.config.kmeans_restarts)->capture_default_str();
  tr_cmd->add_option("--silhouette-cap", tr.config.silhouette_cap)->capture_default_str();
  tr_cmd->add_option("--min-sentences", tr_min_sentences, "Default: 4 for sad, 1 for tps");
  tr_cmd->add_option("-o,--out-dir", tr.out_dir)->required();
  tr_cmd->add_flag("--dump-pairs", tr.dump_pairs, "Write pairs.jsonl");
  tr_cmd->add_flag("--dump-tfidf", tr.dump_tfidf, "Write tfidf.jsonl");

  // embed
  cli::EmbedOptions em;
  std::string em_format = "jsonl";
  auto* em_cmd = app.add_subcommand("embed", "Encode a corpus with a checkpoint");
  em_cmd->add_option("-c,--checkpoint", em.checkpoint)->required();
  em_cmd->add_option("-i,--input", em.input)->required();
  em_cmd->add_option("--format", em_format)->capture_default_str();
  em_cmd->add_option("--max-len", em.max_len, "0: the checkpoint's test length")
      ->capture_default_str();
  em_cmd->add_option("--min-sentences", em.min_sentences)->capture_default_str();
  em_cmd->add_option("-o,--output", em.output)->required();

  // cluster
  cli::ClusterOptions cl;
  auto* cl_cmd = app.add_subcommand("cluster", "Spherical k-means over an embedding file");
  cl_cmd->add_option("-e,--embeddings", cl.embeddings)->required();
  cl_cmd->add_option("--k", cl.kmeans.k)->required();
  cl_cmd->add_option("--seed", cl.kmeans.seed)->capture_default_str();
  cl_cmd->add_option("--max-iter", cl.kmeans.max_iter)->capture_default_str();
  cl_cmd->add_option("--tol", cl.kmeans.tol)->capture_default_str();
  cl_cmd->add_option("--restarts", cl.kmeans.restarts)->capture_default_str();
  cl_cmd->add_option("-o,--output", cl.output)->required();

  // eval
  cli::EvalOptions ev;
  std::string ev_format = "jsonl";
  std::string ev_embeddings;
  std::string ev_output;
  auto* ev_cmd = app.add_subcommand("eval", "Score cluster assignments against gold labels");
  ev_cmd->add_option("-a,--assignments", ev.assignments)->required();
  ev_cmd->add_option("-i,--input", ev.corpus, "Labeled corpus")->required();
  ev_cmd->add_option("--format", ev_format)->capture_default_str();
  ev_cmd->add_option("-e,--embeddings", ev_embeddings, "Also report silhouette");
  ev_cmd->add_option("--silhouette-cap", ev.silhouette_cap)->capture_default_str();
  ev_cmd->add_option("--seed", ev.seed)->capture_default_str();
  ev_cmd->add_option("-o,--output", ev_output, "metrics.json path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage_error", e.what());
  }

  if (threads) setenv("SADCLUSTER_THREADS", std::to_string(*threads).c_str(), 1);

  try {
    if (synth_cmd->parsed()) {
      cli::cmd_synth(synth, synth_out);
    } else if (pre_cmd->parsed()) {
      pre.format = parse_corpus_format(pre_format);
      pre.profile = cli::parse_profile(pre_profile);
      if (!pre_stats.empty()) pre.stats = pre_stats;
      std::cout << cli::cmd_preprocess(pre).dump(2) << '\n';
    } else if (tr_cmd->parsed()) {
      tr.format = parse_corpus_format(tr_format);
      tr.config.method = parse_method(tr_method);
      tr.config.optimizer.kind = parse_optimizer(tr_optimizer);
      tr.config.epochs = tr_epochs;
      tr.min_sentences =
          tr_min_sentences.value_or(tr.config.method == Method::kSad ? 4 : 1);
      const auto metrics = cli::cmd_train(tr);
      std::cout << nlohmann::json{{"best_epoch", metrics["best_epoch"]},
                                  {"documents", metrics["documents"]},
                                  {"out_dir", tr.out_dir.string()}}
                       .dump()
                << '\n';
    } else if (em_cmd->parsed()) {
      em.format = parse_corpus_format(em_format);
      cli::cmd_embed(em);
    } else if (cl_cmd->parsed()) {
      std::cout << cli::cmd_cluster(cl).dump() << '\n';
    } else if (ev_cmd->parsed()) {
      ev.format = parse_corpus_format(ev_format);
      if (!ev_embeddings.empty()) ev.embeddings = ev_embeddings;
      if (!ev_output.empty()) ev.output = ev_output;
      std::cout << cli::cmd_eval(ev).dump(2) << '\n';
    }
  } catch (const Error& e) {
    return report_error(error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what());
  }
  return 0;
}
