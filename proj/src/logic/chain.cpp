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

#include "hyrl/logic/chain.hpp"

#include <stdexcept>
#include <string>

#include "hyrl/util/counters.hpp"

namespace hyrl::logic {

std::vector<uint8_t> exact_forward_chain(const GroundedProgram& gp,
                                         std::span<const int32_t> facts, int steps) {
  util::Counters::instance().exact_chain_calls.fetch_add(1, std::memory_order_relaxed);
  std::vector<uint8_t> v(static_cast<size_t>(gp.num_atoms), 0);
  v[kTopAtom] = 1;
  for (int32_t f : facts) {
    if (f < 0 || f >= gp.num_atoms) {
      throw std::out_of_range("fact index " + std::to_string(f) +
                              " outside the universe");
    }
    if (f == kBottomAtom) {
      throw std::invalid_argument("the bottom atom cannot be asserted as a fact");
    }
    v[f] = 1;
  }
  // Rounds are simultaneous: every premise is read from the previous round.
  std::vector<uint8_t> next(v);
  for (int t = 0; t < steps; ++t) {
    bool changed = false;
    for (const GroundedClause& gc : gp.clauses) {
      for (const GroundInstance& gi : gc.instances) {
        if (next[gi.head]) continue;
        bool fire = true;
        for (int32_t b : gi.body) fire &= v[b] != 0;
        if (fire) {
          next[gi.head] = 1;
          changed = true;
        }
      }
    }
    v = next;
    if (!changed) break;
  }
  v[kBottomAtom] = 0;
  return v;
}

std::vector<uint8_t> exact_forward_chain(const Program& p,
                                         std::span<const int32_t> facts, int steps) {
  return exact_forward_chain(ground_program(p), facts, steps);
}

}  // namespace hyrl::logic
