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
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/common.hpp"
#include "sadcluster/text.hpp"

namespace sadcluster {

struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> sentences;
  std::optional<int> label;
  // Every label seen at ingestion. Single-label documents carry {label}.
  std::vector<int> all_labels;
  std::size_t word_count = 0;
};

struct Corpus {
  std::vector<Document> documents;
  std::vector<std::string> label_names;
  std::optional<int> num_classes;

  std::size_t size() const noexcept { return documents.size(); }
  bool empty() const noexcept { return documents.empty(); }
};

namespace detail {

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_closer(char c) {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}

inline const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> kList = {
      "mr.",    "mrs.",  "ms.",   "dr.",   "prof.", "sr.",   "jr.",   "st.",
      "vs.",    "etc.",  "e.g.",  "i.e.",  "u.s.",  "u.k.",  "u.n.",  "inc.",
      "ltd.",   "corp.", "co.",   "jan.",  "feb.",  "mar.",  "apr.",  "jun.",
      "jul.",   "aug.",  "sep.",  "sept.", "oct.",  "nov.",  "dec.",  "approx.",
      "dept.",  "gen.",  "gov.",  "sen.",  "rep.",  "mt.",   "a.m.",  "p.m.",
      "no.",    "fig.",  "vol.",  "ave.",  "est.",  "cf.",   "al.",
  };
  return kList;
}

// True when the single '.' at `dot` closes a known abbreviation.
inline bool ends_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  while (begin < dot && !is_word_char(text[begin])) ++begin;
  if (begin == dot) return false;
  return abbreviations().contains(to_lower(text.substr(begin, dot - begin + 1)));
}

}  // namespace detail

// Rule-based sentence splitter. A boundary is a run of '.', '!' or '?'
// (optionally followed by closing quotes or brackets) followed by whitespace
// or the end of the text. A lone '.' closing a known abbreviation is not a
// boundary; decimals never split because the '.' is followed by a digit.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    const std::string_view piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };
  std::size_t i = 0;
  while (i < n) {
    if (!detail::is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < n && detail::is_terminator(text[run_end])) ++run_end;
    std::size_t end = run_end;
    while (end < n && detail::is_closer(text[end])) ++end;
    if (end == n || is_space(text[end])) {
      const bool lone_dot = run_end - i == 1 && text[i] == '.';
      if (!(lone_dot && detail::ends_abbreviation(text, i))) emit(end);
    }
    i = end;
  }
  emit(n);
  return out;
}

inline Document make_document(std::string id, std::string text,
                              std::optional<int> label = std::nullopt,
                              std::vector<int> all_labels = {}) {
  Document doc;
  doc.id = std::move(id);
  doc.sentences = split_sentences(text);
  doc.word_count = count_words(text);
  doc.text = std::move(text);
  if (label && all_labels.empty()) all_labels.push_back(*label);
  if (!label && all_labels.size() == 1) label = all_labels.front();
  doc.label = label;
  doc.all_labels = std::move(all_labels);
  return doc;
}

// Recomputes derived fields after the text has been edited.
inline void refresh(Document& doc) {
  doc.sentences = split_sentences(doc.text);
  doc.word_count = count_words(doc.text);
}

inline std::optional<int> infer_num_classes(const std::vector<Document>& docs) {
  std::optional<int> max_label;
  for (const auto& d : docs) {
    for (int l : d.all_labels) max_label = std::max(max_label.value_or(l), l);
    if (d.label) max_label = std::max(max_label.value_or(*d.label), *d.label);
  }
  if (!max_label) return std::nullopt;
  return *max_label + 1;
}

enum class CorpusFormat { kJsonl, kDirPerClass };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "dir-per-class") return CorpusFormat::kDirPerClass;
  fail(ErrorCode::kInvalidArgument, "unknown corpus format '" + std::string(name) + "'");
}

namespace detail {

inline int parse_label_value(const nlohmann::json& v, std::size_t line_no) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                ": labels must be non-negative integers");
  }
  return static_cast<int>(v.get<long long>());
}

}  // namespace detail

inline Corpus read_jsonl_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (!obj.is_object()) fail(ErrorCode::kParse, where + "expected a JSON object");
    if (!obj.contains("id") || !obj["id"].is_string()) {
      fail(ErrorCode::kParse, where + "missing string field 'id'");
    }
    if (!obj.contains("text") || !obj["text"].is_string()) {
      fail(ErrorCode::kParse, where + "missing string field 'text'");
    }
    std::string id = obj["id"].get<std::string>();
    if (!seen.insert(id).second) {
      fail(ErrorCode::kParse, where + "duplicate id '" + id + "'");
    }
    std::optional<int> label;
    std::vector<int> labels;
    if (obj.contains("label") && !obj["label"].is_null()) {
      label = detail::parse_label_value(obj["label"], line_no);
    }
    if (obj.contains("labels") && !obj["labels"].is_null()) {
      if (!obj["labels"].is_array()) fail(ErrorCode::kParse, where + "'labels' must be a list");
      for (const auto& v : obj["labels"]) labels.push_back(detail::parse_label_value(v, line_no));
    }
    corpus.documents.push_back(
        make_document(std::move(id), obj["text"].get<std::string>(), label, std::move(labels)));
  }
  corpus.num_classes = infer_num_classes(corpus.documents);
  return corpus;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads <root>/<class_name>/<file>.txt. Classes are numbered in lexicographic
// order of their directory names; documents follow lexicographic path order.
inline Corpus read_dir_per_class(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "'" + root.string() + "' is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  Corpus corpus;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c])) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    const std::string class_name = class_dirs[c].filename().string();
    corpus.label_names.push_back(class_name);
    for (const auto& f : files) {
      corpus.documents.push_back(make_document(class_name + "/" + f.filename().string(),
                                               read_file(f), static_cast<int>(c)));
    }
  }
  corpus.num_classes = static_cast<int>(class_dirs.size());
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kIo, "path '" + path.string() + "' does not exist");
  }
  if (format == CorpusFormat::kDirPerClass) return read_dir_per_class(path);
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return read_jsonl_corpus(in);
}

inline nlohmann::json document_to_json(const Document& doc, bool with_sentences) {
  nlohmann::json obj;
  obj["id"] = doc.id;
  obj["text"] = doc.text;
  if (doc.all_labels.size() > 1) {
    obj["labels"] = doc.all_labels;
  } else if (doc.label) {
    obj["label"] = *doc.label;
  }
  if (with_sentences) obj["sentences"] = doc.sentences;
  return obj;
}

inline void write_jsonl_corpus(const Corpus& corpus, std::ostream& out,
                               bool with_sentences = false) {
  for (const auto& doc : corpus.documents) {
    out << document_to_json(doc, with_sentences).dump() << '\n';
  }
}

// Count of documents per label index; unlabeled documents are skipped.
inline std::map<int, std::size_t> class_histogram(const Corpus& corpus) {
  std::map<int, std::size_t> hist;
  for (const auto& d : corpus.documents) {
    if (d.label) ++hist[*d.label];
  }
  return hist;
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

inline bool is_header_line(const std::string& line) {
  static const std::regex kKeyValue(R"(^[A-Za-z][A-Za-z0-9_-]*:(\s.*)?$)");
  return std::regex_match(line, kKeyValue);
}

inline bool is_blank(std::string_view line) { return trim(line).empty(); }

// Drops the leading "Key: value" block (with indented continuation lines)
// when it is terminated by a blank line.
inline void strip_header(std::vector<std::string>& lines) {
  if (lines.empty() || !is_header_line(lines.front())) return;
  std::size_t i = 0;
  while (i < lines.size() && !is_blank(lines[i])) {
    const bool continuation = !lines[i].empty() && is_space(lines[i].front());
    if (!continuation && !is_header_line(lines[i])) return;
    ++i;
  }
  if (i == lines.size()) return;
  lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(i + 1));
}

// Drops everything from the last line consisting only of "--".
inline void strip_signature(std::vector<std::string>& lines) {
  for (std::size_t i = lines.size(); i > 0; --i) {
    if (trim(lines[i - 1]) == "--") {
      lines.resize(i - 1);
      return;
    }
  }
}

inline void strip_quotes(std::vector<std::string>& lines) {
  std::erase_if(lines, [](const std::string& line) {
    const std::string_view t = trim(line);
    return !t.empty() && (t.front() == '>' || t.front() == '|');
  });
}

inline std::string strip_urls_and_emails(const std::string& text) {
  static const std::regex kUrl(R"(((https?|ftp)://|www\.)\S+)", std::regex::icase);
  static const std::regex kEmail(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
  std::string out = std::regex_replace(text, kUrl, " ");
  return std::regex_replace(out, kEmail, " ");
}

}  // namespace detail

// Newsgroup-style cleaning of one text. Line rules (header, quoted lines,
// signature) only apply to multi-line input; the result is always a single
// whitespace-normalized line, which makes the operation idempotent.
inline std::string clean_newsgroup_text(std::string_view text) {
  std::string body(text);
  if (body.find('\n') != std::string::npos) {
    auto lines = detail::split_lines(body);
    detail::strip_header(lines);
    detail::strip_signature(lines);
    detail::strip_quotes(lines);
    body = join(lines, "\n");
  }
  return normalize_whitespace(detail::strip_urls_and_emails(body));
}

inline Corpus preprocess_newsgroup_style(const Corpus& corpus, std::size_t min_words = 10) {
  require(min_words >= 1, "min_words must be at least 1");
  Corpus out;
  out.label_names = corpus.label_names;
  out.num_classes = corpus.num_classes;
  for (const auto& doc : corpus.documents) {
    Document cleaned = doc;
    cleaned.text = clean_newsgroup_text(doc.text);
    refresh(cleaned);
    if (cleaned.word_count >= min_words) out.documents.push_back(std::move(cleaned));
  }
  return out;
}

// Reuters-style filtering: single-label, non-empty, de-duplicated documents
// restricted to the `top_k_classes` most frequent labels, relabeled densely
// by descending frequency (ties by smaller original label).
inline Corpus preprocess_reuters_style(const Corpus& corpus, std::size_t top_k_classes = 10) {
  require(top_k_classes >= 1, "top_k_classes must be at least 1");
  std::vector<const Document*> kept;
  std::unordered_set<std::string> seen_texts;
  for (const auto& doc : corpus.documents) {
    if (doc.all_labels.size() != 1) continue;
    const std::string normalized = normalize_whitespace(doc.text);
    if (normalized.empty()) continue;
    if (!seen_texts.insert(normalized).second) continue;
    kept.push_back(&doc);
  }
  std::map<int, std::size_t> counts;
  for (const auto* d : kept) ++counts[d->all_labels.front()];
  std::vector<std::pair<int, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k_classes) ranked.resize(top_k_classes);
  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < ranked.size(); ++i) remap[ranked[i].first] = static_cast<int>(i);

  Corpus out;
  for (const auto* d : kept) {
    const auto it = remap.find(d->all_labels.front());
    if (it == remap.end()) continue;
    Document doc = *d;
    doc.label = it->second;
    doc.all_labels = {it->second};
    out.documents.push_back(std::move(doc));
  }
  if (!corpus.label_names.empty()) {
    for (const auto& [old_label, count] : ranked) {
      const auto idx = static_cast<std::size_t>(old_label);
      out.label_names.push_back(idx < corpus.label_names.size() ? corpus.label_names[idx]
                                                                 : std::to_string(old_label));
    }
  }
  if (!ranked.empty()) out.num_classes = static_cast<int>(ranked.size());
  return out;
}

inline Corpus filter_min_sentences(const Corpus& corpus, std::size_t min_sentences = 4) {
  require(min_sentences >= 1, "min_sentences must be at least 1");
  Corpus out;
  out.label_names = corpus.label_names;
  out.num_classes = corpus.num_classes;
  for (const auto& doc : corpus.documents) {
    if (doc.sentences.size() >= min_sentences) out.documents.push_back(doc);
  }
  return out;
}

// Gold labels as a dense vector; throws if any document is unlabeled.
inline std::vector<int> require_labels(const Corpus& corpus) {
  std::vector<int> labels;
  labels.reserve(corpus.size());
  for (const auto& d : corpus.documents) {
    if (!d.label) fail(ErrorCode::kInvalidArgument, "document '" + d.id + "' has no label");
    labels.push_back(*d.label);
  }
  return labels;
}

}  // namespace sadcluster
