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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sadcluster/common.hpp"

namespace sadcluster {

enum class OptimizerKind { kAdamW, kSgd };

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adamw") return OptimizerKind::kAdamW;
  if (name == "sgd") return OptimizerKind::kSgd;
  fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + std::string(name) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// Per-tensor moment estimates, created lazily on the first step.
struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

// One update of `params` from `grads` (matched by position). AdamW applies
// decoupled weight decay before the moment step; SGD folds weight decay into
// the gradient. Non-finite gradients abort before anything is modified.
inline void optimizer_step(std::span<const std::span<double>> params,
                           std::span<const std::span<double>> grads,
                           const OptimizerConfig& config, OptimizerState& state) {
  require(params.size() == grads.size(), "optimizer_step: tensor count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].size() == grads[t].size(), "optimizer_step: tensor shape mismatch");
    if (!all_finite(grads[t])) {
      fail(ErrorCode::kNumeric, "optimizer_step: non-finite gradient in tensor " + std::to_string(t));
    }
  }
  const double lr = config.learning_rate;
  if (config.kind == OptimizerKind::kSgd) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto p = params[t];
      auto g = grads[t];
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] + config.weight_decay * p[i]);
    }
    ++state.step;
    return;
  }

  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, step);
  const double bias2 = 1.0 - std::pow(config.beta2, step);
  const double decay = 1.0 - lr * config.weight_decay;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace sadcluster
