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

#ifndef HYRL_SRC_ENV_ENVS_INTERNAL_HPP_
#define HYRL_SRC_ENV_ENVS_INTERNAL_HPP_

#include <memory>

#include "hyrl/env/env.hpp"

namespace hyrl::env {

std::unique_ptr<Env> make_minikangaroo(const EnvConfig& cfg);
std::unique_ptr<Env> make_miniseaquest(const EnvConfig& cfg);
std::unique_ptr<Env> make_minidonkeykong(const EnvConfig& cfg);

// Shared grid helpers.
inline bool in_grid(int x, int y) { return x >= 0 && x < kGrid && y >= 0 && y < kGrid; }
inline int cheby(int x0, int y0, int x1, int y1) {
  int dx = x0 > x1 ? x0 - x1 : x1 - x0;
  int dy = y0 > y1 ? y0 - y1 : y1 - y0;
  return dx > dy ? dx : dy;
}
inline void mark(std::vector<double>& frame, int plane, int x, int y) {
  frame[static_cast<size_t>((plane * kGrid + y) * kGrid + x)] = 1.0;
}
// Gauge rendering: the top row of `plane` lit proportionally to level/max.
inline void mark_gauge(std::vector<double>& frame, int plane, int level, int max) {
  int lit = level <= 0 ? 0 : (level * kGrid + max - 1) / max;
  if (lit > kGrid) lit = kGrid;
  for (int x = 0; x < lit; ++x) mark(frame, plane, x, 0);
}

}  // namespace hyrl::env

#endif  // HYRL_SRC_ENV_ENVS_INTERNAL_HPP_
