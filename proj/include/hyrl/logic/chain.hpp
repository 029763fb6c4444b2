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

#ifndef HYRL_LOGIC_CHAIN_HPP_
#define HYRL_LOGIC_CHAIN_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "hyrl/logic/ground.hpp"

namespace hyrl::logic {

// Crisp forward chaining for `steps` rounds from the given facts.
// Returns a 0/1 membership vector over the universe; the top slot is always
// set and the bottom slot never is. Monotone: each round only adds atoms,
// so steps >= num_atoms always reaches the fixpoint.
std::vector<uint8_t> exact_forward_chain(const GroundedProgram& gp,
                                         std::span<const int32_t> facts,
                                         int steps);

// Convenience overload that grounds first.
std::vector<uint8_t> exact_forward_chain(const Program& p,
                                         std::span<const int32_t> facts,
                                         int steps);

}  // namespace hyrl::logic

#endif  // HYRL_LOGIC_CHAIN_HPP_
