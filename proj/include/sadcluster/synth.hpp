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
#include <string>
#include <string_view>
#include <vector>

#include "sadcluster/common.hpp"
#include "sadcluster/corpus.hpp"
#include "sadcluster/rng.hpp"

namespace sadcluster {

// Topic-block corpus generator for end-to-end checks.
struct SynthConfig {
  std::size_t topics = 4;
  std::size_t docs_per_topic = 50;
  std::size_t vocab_per_topic = 300;
  std::size_t sentences_per_doc = 8;
  std::size_t min_words_per_sentence = 8;
  std::size_t max_words_per_sentence = 12;
  double overlap = 0.2;  // share of tokens drawn from the shared pool
  std::size_t overlap_vocab = 40;
  // Topic-independent function words ("the", "of", ...), Zipf distributed.
  double function_word_rate = 0.7;
  std::size_t function_vocab = 30;
  std::uint64_t seed = 0;
};

// Distinct pronounceable pseudo-word for every index below 10^6.
inline std::string synth_word(std::size_t index) {
  static constexpr std::string_view kConsonants = "bcdfghjklmnprstvwxyz";
  static constexpr std::string_view kVowels = "aeiou";
  std::string word;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syllable = index % 100;
    index /= 100;
    word.push_back(kConsonants[syllable / 5]);
    word.push_back(kVowels[syllable % 5]);
  }
  return word;
}

namespace detail {

// Zipf(1) sampler over n ranks.
class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / static_cast<double>(r + 1);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace detail

// Each token is a function word with probability function_word_rate;
// otherwise topic t draws it from the shared pool with probability `overlap`
// and from its own vocabulary block the rest of the time. Ranks inside every
// block follow Zipf(1). Labels are topic ids; document order is a seeded
// shuffle.
inline Corpus generate_synthetic_corpus(const SynthConfig& config) {
  require(config.topics >= 1, "topics must be positive");
  require(config.vocab_per_topic >= 1, "vocab_per_topic must be positive");
  require(config.sentences_per_doc >= 1, "sentences_per_doc must be positive");
  require(config.min_words_per_sentence >= 1 &&
              config.min_words_per_sentence <= config.max_words_per_sentence,
          "invalid words-per-sentence range");
  require(config.overlap >= 0.0 && config.overlap <= 1.0, "overlap must lie in [0, 1]");
  require(config.overlap == 0.0 || config.overlap_vocab >= 1, "overlap pool is empty");
  require((config.topics + 2) *
                  std::max({config.vocab_per_topic, config.overlap_vocab, config.function_vocab}) <=
              1000000,
          "synthetic vocabulary too large");

  const std::size_t block =
      std::max({config.vocab_per_topic, config.overlap_vocab, config.function_vocab});
  const detail::ZipfSampler topic_sampler(config.vocab_per_topic);
  const detail::ZipfSampler pool_sampler(std::max<std::size_t>(1, config.overlap_vocab));
  const detail::ZipfSampler function_sampler(std::max<std::size_t>(1, config.function_vocab));
  // Each topic ranks its block in its own random order.
  std::vector<std::vector<std::size_t>> rank_to_word(config.topics);
  for (std::size_t t = 0; t < config.topics; ++t) {
    Rng rng = make_stream(config.seed, "synth_ranks", t);
    rank_to_word[t] = rng.permutation(config.vocab_per_topic);
  }

  Corpus corpus;
  for (std::size_t t = 0; t < config.topics; ++t) corpus.label_names.push_back("topic" + std::to_string(t));
  corpus.num_classes = static_cast<int>(config.topics);
  for (std::size_t t = 0; t < config.topics; ++t) {
    for (std::size_t i = 0; i < config.docs_per_topic; ++i) {
      Rng rng = make_stream(config.seed, "synth_doc", t, i);
      std::string text;
      for (std::size_t s = 0; s < config.sentences_per_doc; ++s) {
        const std::size_t span = config.max_words_per_sentence - config.min_words_per_sentence + 1;
        const std::size_t words = config.min_words_per_sentence + rng.uniform_index(span);
        std::string sentence;
        for (std::size_t w = 0; w < words; ++w) {
          std::size_t word;
          if (rng.bernoulli(config.function_word_rate)) {
            word = (config.topics + 1) * block + function_sampler(rng);
          } else if (rng.bernoulli(config.overlap)) {
            word = config.topics * block + pool_sampler(rng);
          } else {
            word = t * block + rank_to_word[t][topic_sampler(rng)];
          }
          std::string token = synth_word(word);
          if (w == 0) token[0] = static_cast<char>(token[0] - 'a' + 'A');
          if (w > 0) sentence.push_back(' ');
          sentence += token;
        }
        sentence.push_back('.');
        if (s > 0) text.push_back(' ');
        text += sentence;
      }
      corpus.documents.push_back(make_document(
          "synth-" + std::to_string(t) + "-" + std::to_string(i), std::move(text), static_cast<int>(t)));
    }
  }
  Rng order = make_stream(config.seed, "synth_order");
  order.shuffle(corpus.documents);
  return corpus;
}

}  // namespace sadcluster
