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

#ifndef HYRL_LOGIC_GROUND_HPP_
#define HYRL_LOGIC_GROUND_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hyrl/logic/program.hpp"

namespace hyrl::logic {

struct GroundingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One clause instantiation: body atoms ground, all indices into the universe.
struct GroundInstance {
  int32_t head = kBottomAtom;
  std::vector<int32_t> body;
};

struct GroundedClause {
  // Instances in substitution order: clause variables sorted by name, tuples
  // enumerated lexicographically over each variable's constant list.
  std::vector<GroundInstance> instances;
};

// Deterministic grounding of every clause over the program's universe.
//   num_atoms  (G)  universe size including the bottom/top slots
//   max_paths  (S)  most instances of one clause sharing one ground head
//   max_body   (L)  longest clause body
struct GroundedProgram {
  Program program;
  std::vector<GroundedClause> clauses;
  int64_t num_atoms = 0;
  int64_t max_paths = 0;
  int64_t max_body = 0;
};

GroundedProgram ground_program(const Program& p);

}  // namespace hyrl::logic

#endif  // HYRL_LOGIC_GROUND_HPP_
