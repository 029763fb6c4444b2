// Copyright 2026 The hyrl Authors.
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

#ifndef HYRL_GRAD_CHECK_HPP_
#define HYRL_GRAD_CHECK_HPP_

#include <functional>
#include <vector>

#include "hyrl/grad/tape.hpp"

namespace hyrl::grad {

// Builds the scalar function on a fresh tape from the given leaves and
// returns the scalar output node. Called repeatedly by check_gradients.
using ScalarFn =
    std::function<Tape::Id(Tape&, const std::vector<Tape::Id>&)>;

// Compares reverse-mode gradients against central finite differences at the
// given point. Returns max over coordinates of
//   |analytic - numeric| / max(1, |analytic|).
// The caller is responsible for evaluating at a smooth point (away from
// clamp/min boundaries).
inline double check_gradients(const ScalarFn& fn, std::vector<Tensor> inputs,
                              double h = 1e-5) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Tape::Id> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(tape.input(t));
    Tape::Id out = fn(tape, ids);
    tape.backward(out);
    for (Tape::Id id : ids) {
      if (tape.has_grad(id)) {
        analytic.push_back(tape.grad(id));
      } else {
        analytic.push_back(Tensor(tape.value(id).shape(), 0.0));
      }
    }
  }
  auto eval = [&](const std::vector<Tensor>& pt) {
    Tape tape;
    std::vector<Tape::Id> ids;
    ids.reserve(pt.size());
    for (const Tensor& t : pt) ids.push_back(tape.input(t));
    return tape.scalar(fn(tape, ids));
  };
  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int64_t k = 0; k < inputs[i].size(); ++k) {
      double orig = inputs[i].at(k);
      inputs[i].at(k) = orig + h;
      double up = eval(inputs);
      inputs[i].at(k) = orig - h;
      double down = eval(inputs);
      inputs[i].at(k) = orig;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[i].at(k);
      double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace hyrl::grad

#endif  // HYRL_GRAD_CHECK_HPP_
