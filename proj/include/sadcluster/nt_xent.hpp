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

#include <cmath>
#include <limits>
#include <vector>

#include "sadcluster/common.hpp"

namespace sadcluster {

// NT-Xent over 2B rows where rows 2i and 2i+1 form a positive pair. Every
// anchor sees its partner as the positive and the other 2B - 2 rows as
// negatives; the loss is the mean over all 2B anchors.
struct NtXentResult {
  double loss = 0.0;
  Matrix gradient;  // d(loss)/d(embeddings), same shape as the input
};

namespace detail {

inline std::size_t positive_of(std::size_t i) { return i ^ 1U; }

inline std::vector<double> validated_norms(const Matrix& embeddings, double temperature) {
  const std::size_t n = embeddings.rows();
  if (n < 4 || n % 2 != 0) {
    fail(ErrorCode::kInvalidArgument,
         "nt_xent needs an even number of rows and at least 2 positive pairs");
  }
  if (!(temperature > 0.0)) fail(ErrorCode::kInvalidArgument, "temperature must be positive");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = l2_norm(embeddings.row(i));
    if (!(norms[i] > 0.0)) {
      fail(ErrorCode::kNumeric, "nt_xent: row " + std::to_string(i) + " has zero norm");
    }
  }
  return norms;
}

}  // namespace detail

inline NtXentResult nt_xent(const Matrix& embeddings, double temperature, bool with_gradient) {
  const std::vector<double> norms = detail::validated_norms(embeddings, temperature);
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  Matrix unit = embeddings;
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : unit.row(i)) x /= norms[i];
  }

  // coeff(i, j) = d(loss)/d(sim(i, j)) for the anchor-i term.
  Matrix coeff(n, n);
  std::vector<double> logits(n);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      logits[j] = dot(unit.row(i), unit.row(j)) / temperature;
      max_logit = std::max(max_logit, logits[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum += std::exp(logits[j] - max_logit);
    }
    const double log_denominator = max_logit + std::log(sum);
    const std::size_t p = detail::positive_of(i);
    total += log_denominator - logits[p];
    if (with_gradient) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double softmax = std::exp(logits[j] - log_denominator);
        coeff(i, j) = (softmax - (j == p ? 1.0 : 0.0)) * inv_n / temperature;
      }
    }
  }

  NtXentResult result;
  result.loss = total * inv_n;
  if (!with_gradient) return result;

  // Through the cosine: dL/du_i = sum_j (c_ij + c_ji) u_j, then through the
  // normalization: dL/dx_i = (dL/du_i - (u_i . dL/du_i) u_i) / |x_i|.
  result.gradient = Matrix(n, d);
  std::vector<double> grad_unit(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(grad_unit.begin(), grad_unit.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = coeff(i, j) + coeff(j, i);
      const auto uj = unit.row(j);
      for (std::size_t k = 0; k < d; ++k) grad_unit[k] += c * uj[k];
    }
    const auto ui = unit.row(i);
    const double radial = dot(ui, grad_unit);
    auto gi = result.gradient.row(i);
    for (std::size_t k = 0; k < d; ++k) gi[k] = (grad_unit[k] - radial * ui[k]) / norms[i];
  }
  return result;
}

inline double nt_xent_loss(const Matrix& embeddings, double temperature) {
  return nt_xent(embeddings, temperature, false).loss;
}

inline Matrix nt_xent_gradient(const Matrix& embeddings, double temperature) {
  return nt_xent(embeddings, temperature, true).gradient;
}

}  // namespace sadcluster
