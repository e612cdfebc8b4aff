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
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sadcluster/common.hpp"
#include "sadcluster/rng.hpp"

namespace sadcluster {

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

// Minimum-cost assignment (Kuhn-Munkres with potentials, O(k^3)).
// Rectangular inputs are padded with zero rows or columns; row_to_col then
// has one entry per original row and may point at padded columns.
inline Assignment hungarian(const Matrix& cost) {
  if (!all_finite(cost.flat())) fail(ErrorCode::kNumeric, "hungarian: non-finite cost entry");
  const std::size_t n = std::max(cost.rows(), cost.cols());
  Assignment result;
  if (n == 0) return result;
  auto at = [&](std::size_t i, std::size_t j) {
    return (i < cost.rows() && j < cost.cols()) ? cost(i, j) : 0.0;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j, 0 = free.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> full(n);
  for (std::size_t j = 1; j <= n; ++j) full[p[j] - 1] = j - 1;
  result.row_to_col.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cost.rows()));
  for (std::size_t i = 0; i < cost.rows(); ++i) result.cost += at(i, result.row_to_col[i]);
  return result;
}

namespace detail {

inline void check_partition_pair(std::span<const int> labels, std::span<const int> clusters) {
  if (labels.size() != clusters.size()) {
    fail(ErrorCode::kInvalidArgument, "labels and clusters differ in length (" +
                                          std::to_string(labels.size()) + " vs " +
                                          std::to_string(clusters.size()) + ")");
  }
  require(!labels.empty(), "partitions must be non-empty");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && clusters[i] >= 0, "partition ids must be non-negative");
  }
}

// Maps arbitrary ids to 0..m-1 in ascending id order.
inline std::vector<std::size_t> compress_ids(std::span<const int> ids, std::size_t& count) {
  std::map<int, std::size_t> index;
  for (int id : ids) index.emplace(id, 0);
  std::size_t next = 0;
  for (auto& [id, slot] : index) slot = next++;
  count = next;
  std::vector<std::size_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = index.at(ids[i]);
  return out;
}

}  // namespace detail

struct AccuracyResult {
  double acc = 0.0;
  // mapping[c] = label matched to cluster id c, or -1 if unmatched.
  std::vector<int> mapping;
  Matrix confusion;  // (max label + 1) x (max cluster + 1)
};

// Best accuracy over one-to-one cluster -> label mappings, found with the
// Hungarian algorithm on the negated confusion matrix.
inline AccuracyResult clustering_accuracy(std::span<const int> labels,
                                          std::span<const int> clusters) {
  detail::check_partition_pair(labels, clusters);
  const auto num_labels = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  const auto num_clusters =
      static_cast<std::size_t>(*std::max_element(clusters.begin(), clusters.end())) + 1;
  AccuracyResult result;
  result.confusion = Matrix(num_labels, num_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    result.confusion(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(clusters[i])) += 1.0;
  }
  Matrix cost(num_clusters, num_labels);
  for (std::size_t c = 0; c < num_clusters; ++c) {
    for (std::size_t l = 0; l < num_labels; ++l) cost(c, l) = -result.confusion(l, c);
  }
  const Assignment match = hungarian(cost);
  result.mapping.assign(num_clusters, -1);
  double matched = 0.0;
  for (std::size_t c = 0; c < num_clusters; ++c) {
    const std::size_t l = match.row_to_col[c];
    if (l < num_labels) {
      result.mapping[c] = static_cast<int>(l);
      matched += result.confusion(l, c);
    }
  }
  result.acc = matched / static_cast<double>(labels.size());
  return result;
}

// E[MI] between two partitions with the given cluster sizes under the
// permutation model (hypergeometric cell counts), in nats.
inline double expected_mutual_information(std::span<const std::size_t> a,
                                          std::span<const std::size_t> b, std::size_t n) {
  const double N = static_cast<double>(n);
  const double lg_n = std::lgamma(N + 1.0);
  double emi = 0.0;
  for (std::size_t ai : a) {
    for (std::size_t bj : b) {
      const std::size_t lo = std::max<std::size_t>(1, ai + bj > n ? ai + bj - n : 0);
      const std::size_t hi = std::min(ai, bj);
      const double A = static_cast<double>(ai);
      const double B = static_cast<double>(bj);
      const double log_front = std::lgamma(A + 1.0) + std::lgamma(B + 1.0) +
                               std::lgamma(N - A + 1.0) + std::lgamma(N - B + 1.0) - lg_n;
      for (std::size_t nij = lo; nij <= hi; ++nij) {
        const double x = static_cast<double>(nij);
        const double log_p = log_front - std::lgamma(x + 1.0) - std::lgamma(A - x + 1.0) -
                             std::lgamma(B - x + 1.0) - std::lgamma(N - A - B + x + 1.0);
        emi += (x / N) * std::log(N * x / (A * B)) * std::exp(log_p);
      }
    }
  }
  return emi;
}

// Adjusted mutual information, natural log, arithmetic-mean normalization.
// Two single-cluster partitions score 1.
inline double adjusted_mutual_information(std::span<const int> labels,
                                          std::span<const int> clusters) {
  detail::check_partition_pair(labels, clusters);
  std::size_t r = 0;
  std::size_t c = 0;
  const auto u = detail::compress_ids(labels, r);
  const auto v = detail::compress_ids(clusters, c);
  if (r == 1 && c == 1) return 1.0;
  const std::size_t n = labels.size();
  const double N = static_cast<double>(n);
  std::vector<std::size_t> table(r * c, 0), a(r, 0), b(c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++table[u[i] * c + v[i]];
    ++a[u[i]];
    ++b[v[i]];
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const auto nij = static_cast<double>(table[i * c + j]);
      if (nij > 0.0) {
        mi += nij / N * std::log(N * nij / (static_cast<double>(a[i]) * static_cast<double>(b[j])));
      }
    }
  }
  auto entropy = [N](const std::vector<std::size_t>& sizes) {
    double h = 0.0;
    for (std::size_t s : sizes) {
      const double p = static_cast<double>(s) / N;
      h -= p * std::log(p);
    }
    return h;
  };
  const double emi = expected_mutual_information(a, b, n);
  double denominator = 0.5 * (entropy(a) + entropy(b)) - emi;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  denominator = denominator < 0.0 ? std::min(denominator, -kEps) : std::max(denominator, kEps);
  return (mi - emi) / denominator;
}

// Mean silhouette with distance 1 - cos. Singleton clusters score 0, as do
// points with a = b = 0. With 0 < sample_cap < n, only a seeded sample of
// sample_cap anchors is scored; distances are always taken over all points.
inline double silhouette_score(const Matrix& embeddings, std::span<const std::size_t> assignments,
                               std::size_t sample_cap = 0, std::uint64_t seed = 0) {
  const std::size_t n = embeddings.rows();
  require(assignments.size() == n, "silhouette_score: assignment count mismatch");
  require(n >= 3, "silhouette_score needs at least 3 points");
  std::vector<int> ids(assignments.begin(), assignments.end());
  std::size_t k = 0;
  const auto cluster = detail::compress_ids(ids, k);
  if (k < 2) fail(ErrorCode::kInvalidArgument, "silhouette_score needs at least 2 clusters");
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : cluster) ++sizes[c];

  std::vector<std::size_t> anchors(n);
  for (std::size_t i = 0; i < n; ++i) anchors[i] = i;
  if (sample_cap > 0 && sample_cap < n) {
    Rng rng = make_stream(seed, "silhouette");
    rng.shuffle(anchors);
    anchors.resize(sample_cap);
    std::sort(anchors.begin(), anchors.end());
  }

  const Matrix unit = normalized_rows(embeddings);
  std::vector<double> scores(anchors.size(), 0.0);
  parallel_for(anchors.size(), [&](std::size_t s) {
    const std::size_t i = anchors[s];
    const std::size_t own = cluster[i];
    if (sizes[own] < 2) return;
    std::vector<double> sums(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[cluster[j]] += std::max(0.0, 1.0 - dot(unit.row(i), unit.row(j)));
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    scores[s] = denom > 0.0 ? (b - a) / denom : 0.0;
  });
  double total = 0.0;
  for (double x : scores) total += x;
  return total / static_cast<double>(scores.size());
}

inline constexpr int kMetricsSchemaVersion = 1;

struct EvalReport {
  double acc = 0.0;
  double ami = 0.0;
  std::optional<double> silhouette;
  Matrix confusion;
  std::vector<int> mapping;
};

inline EvalReport evaluate(std::span<const int> labels, std::span<const int> clusters,
                           const Matrix* embeddings = nullptr, std::size_t sample_cap = 0,
                           std::uint64_t seed = 0) {
  EvalReport report;
  AccuracyResult acc = clustering_accuracy(labels, clusters);
  report.acc = acc.acc;
  report.confusion = std::move(acc.confusion);
  report.mapping = std::move(acc.mapping);
  report.ami = adjusted_mutual_information(labels, clusters);
  if (embeddings != nullptr) {
    std::vector<std::size_t> assignments(clusters.begin(), clusters.end());
    report.silhouette = silhouette_score(*embeddings, assignments, sample_cap, seed);
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t r = 0; r < report.confusion.rows(); ++r) {
    std::vector<long long> row;
    for (double x : report.confusion.row(r)) row.push_back(static_cast<long long>(x));
    confusion.push_back(row);
  }
  nlohmann::json j = {{"schema_version", kMetricsSchemaVersion},
                      {"acc", report.acc},
                      {"ami", report.ami},
                      {"mapping", report.mapping},
                      {"confusion", confusion}};
  j["silhouette"] = report.silhouette ? nlohmann::json(*report.silhouette) : nlohmann::json(nullptr);
  return j;
}

}  // namespace sadcluster
