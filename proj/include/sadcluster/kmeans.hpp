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
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sadcluster/common.hpp"
#include "sadcluster/rng.hpp"

namespace sadcluster {

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;
  std::size_t restarts = 10;
};

struct ClusterModel {
  Matrix centroids;  // k x d, unit rows
  std::vector<std::size_t> assignments;
  double objective = 0.0;  // sum of cos(x_i, centroid[a_i])
  std::size_t iterations_run = 0;
  std::vector<double> objective_trace;  // objective after every assignment step

  std::size_t k() const noexcept { return centroids.rows(); }
};

// argmax_j cos(x, centroid_j); ties go to the smallest j.
inline std::size_t nearest_centroid(const Matrix& unit_centroids, std::span<const double> unit_x) {
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < unit_centroids.rows(); ++j) {
    const double s = dot(unit_centroids.row(j), unit_x);
    if (s > best_sim) {
      best_sim = s;
      best = j;
    }
  }
  return best;
}

inline std::size_t assign(const ClusterModel& model, std::span<const double> embedding) {
  if (embedding.size() != model.centroids.cols()) {
    fail(ErrorCode::kInvalidArgument, "assign: embedding has dimension " +
                                          std::to_string(embedding.size()) + ", centroids have " +
                                          std::to_string(model.centroids.cols()));
  }
  std::vector<double> unit(embedding.begin(), embedding.end());
  normalize_in_place(unit);
  return nearest_centroid(model.centroids, unit);
}

namespace detail {

// k-means++ seeding with d(x, c) = 1 - cos(x, c).
inline Matrix kmeanspp_init(const Matrix& unit, std::size_t k, Rng& rng) {
  const std::size_t n = unit.rows();
  Matrix centroids(k, unit.cols());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += dist[i] * dist[i];
      if (total > 0.0) {
        double target = rng.uniform01() * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          const double w = dist[i] * dist[i];
          if (w <= 0.0) continue;
          pick = i;
          if (target < w) break;
          target -= w;
        }
      } else {
        // Every point coincides with a centroid already; take an unused one.
        std::vector<std::size_t> unused;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) unused.push_back(i);
        }
        pick = unused[rng.uniform_index(unused.size())];
      }
    }
    chosen[pick] = true;
    std::copy(unit.row(pick).begin(), unit.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::max(0.0, 1.0 - dot(unit.row(i), centroids.row(c)));
      dist[i] = std::min(dist[i], d);
    }
  }
  return centroids;
}

inline double assign_all(const Matrix& unit, const Matrix& centroids,
                         std::vector<std::size_t>& assignments, std::vector<double>& sims) {
  const std::size_t n = unit.rows();
  parallel_for(n, [&](std::size_t i) {
    assignments[i] = nearest_centroid(centroids, unit.row(i));
    sims[i] = dot(unit.row(i), centroids.row(assignments[i]));
  });
  double objective = 0.0;
  for (double s : sims) objective += s;
  return objective;
}

inline ClusterModel kmeans_single(const Matrix& unit, const KMeansOptions& options,
                                  std::uint64_t seed) {
  const std::size_t n = unit.rows();
  const std::size_t k = options.k;
  Rng rng(seed);
  ClusterModel model;
  model.centroids = kmeanspp_init(unit, k, rng);
  model.assignments.assign(n, 0);
  std::vector<double> sims(n);
  model.objective = assign_all(unit, model.centroids, model.assignments, sims);
  model.objective_trace.push_back(model.objective);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    // Update: centroid = normalized sum of its members, summed in index order.
    Matrix next(k, unit.cols());
    std::vector<std::size_t> members(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = next.row(model.assignments[i]);
      const auto x = unit.row(i);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += x[c];
      ++members[model.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t j = 0; j < k; ++j) {
      if (members[j] > 0 && normalize_in_place(next.row(j)) > 0.0) continue;
      // Empty (or degenerate) cluster: move it onto the worst-fit point.
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (worst == n || sims[i] < sims[worst]) worst = i;
      }
      taken[worst] = true;
      std::copy(unit.row(worst).begin(), unit.row(worst).end(), next.row(j).begin());
    }

    std::vector<std::size_t> assignments(n);
    const double objective = assign_all(unit, next, assignments, sims);
    ++model.iterations_run;
    const double improvement = objective - model.objective;
    const bool unchanged = assignments == model.assignments;
    model.centroids = std::move(next);
    model.assignments = std::move(assignments);
    model.objective = objective;
    model.objective_trace.push_back(objective);
    if (unchanged || improvement < options.tol) break;
  }
  return model;
}

}  // namespace detail

// Spherical k-means with cosine k-means++ seeding. Rows are normalized
// internally, so any positive rescaling of a row leaves the result unchanged.
// The returned assignments are the argmax-cosine assignments to the returned
// centroids, and `objective` is their summed similarity. With restarts > 1 the
// run with the highest objective wins (earliest on ties).
inline ClusterModel spherical_kmeans(const Matrix& embeddings, const KMeansOptions& options) {
  const std::size_t n = embeddings.rows();
  if (options.k < 2) fail(ErrorCode::kInvalidArgument, "spherical_kmeans needs k >= 2");
  if (n < options.k) {
    fail(ErrorCode::kInvalidArgument, "spherical_kmeans needs at least k points (n=" +
                                          std::to_string(n) + ", k=" +
                                          std::to_string(options.k) + ")");
  }
  require(options.restarts >= 1, "restarts must be at least 1");
  Matrix unit = normalized_rows(embeddings);
  for (std::size_t i = 0; i < n; ++i) {
    if (l2_norm(unit.row(i)) == 0.0) {
      fail(ErrorCode::kInvalidArgument, "spherical_kmeans: row " + std::to_string(i) + " is zero");
    }
  }
  ClusterModel best;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    ClusterModel run = detail::kmeans_single(unit, options, stream_seed(options.seed, "kmeans", r));
    if (r == 0 || run.objective > best.objective) best = std::move(run);
  }
  return best;
}

}  // namespace sadcluster
