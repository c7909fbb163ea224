// Copyright 2026 The fsbed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fsbed/optim.hpp"

#include <cmath>

#include "fsbed/common.hpp"

namespace fsbed {

void Adam::update(std::size_t block, std::span<double> params,
                  std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw Error(Errc::ShapeMismatch, "Adam: parameter/gradient size differ");
  }
  if (t_ < 1) throw Error(Errc::InvalidConfig, "Adam: update before tick");
  if (m_.size() <= block) {
    m_.resize(block + 1);
    v_.resize(block + 1);
  }
  auto& m = m_[block];
  auto& v = v_[block];
  if (m.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grads[i];
    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

}  // namespace fsbed
