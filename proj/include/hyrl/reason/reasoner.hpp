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

#ifndef HYRL_REASON_REASONER_HPP_
#define HYRL_REASON_REASONER_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hyrl/grad/tape.hpp"
#include "hyrl/logic/ground.hpp"

namespace hyrl::reason {

// Body-atom lookup table of one grounded program, one row block per clause.
// Row (j, k) lists the k-th way clause i can conclude atom j, padded to
// max_body with the top atom; unused path slots hold the bottom atom in
// position 0 so their conjunction is exactly zero.
struct IndexTensor {
  int64_t num_clauses = 0;  // C
  int64_t num_atoms = 0;    // G
  int64_t max_paths = 0;    // S
  int64_t max_body = 0;     // L
  // Per clause: G*S*L flattened universe indices, shared with gather nodes.
  std::vector<std::shared_ptr<const std::vector<int64_t>>> rows;
};

IndexTensor compile_indices(const logic::GroundedProgram& gp);

// Raw (pre-softmax) clause-selection weights, one row per rule slot.
struct RuleWeights {
  grad::Tensor w;  // [slots, clauses]

  static RuleWeights zeros(int64_t slots, int64_t clauses);
  // One slot per clause, preferring itself: scale on the diagonal.
  static RuleWeights identity(int64_t clauses, double scale = 5.0);
  // Pin a slot to one clause hard enough that softmax rounds to one.
  void one_hot(int64_t slot, int64_t clause, double on = 30.0, double off = -30.0);

  int64_t slots() const { return w.shape()[0]; }
  int64_t clauses() const { return w.shape()[1]; }
};

struct ReasonerConfig {
  int steps = 5;
  double gamma = 0.01;
};

// Soft forward chaining over valuation rows. Each step gathers body values,
// multiplies them per path, merges paths, rule slots, and the previous
// valuation with floor-free soft disjunctions, clamped to [0,1] with the
// reserved slots re-pinned. Atoms with no support are exact fixed points, so
// hard one-hot weights on 0/1 inputs reproduce crisp chaining to near machine
// precision at any step count.
class Reasoner {
 public:
  explicit Reasoner(logic::GroundedProgram gp, ReasonerConfig cfg = {});

  const logic::GroundedProgram& grounded() const { return gp_; }
  const logic::Program& program() const { return gp_.program; }
  const IndexTensor& indices() const { return idx_; }
  const ReasonerConfig& config() const { return cfg_; }

  // One deduction round. v: [B,G] valuation node; w_soft: [slots,C] softmaxed.
  grad::Tape::Id infer_step(grad::Tape& t, grad::Tape::Id v,
                            grad::Tape::Id w_soft) const;

  // config().steps rounds from v0 with raw weights (softmaxed internally).
  grad::Tape::Id forward(grad::Tape& t, grad::Tape::Id v0,
                         grad::Tape::Id w_raw) const;

  // Gradient-free convenience wrapper around forward().
  grad::Tensor evaluate(const grad::Tensor& v0, const RuleWeights& rw) const;

  // [1,G] valuation with the top slot and the given universe indices at one.
  grad::Tensor valuation(std::span<const int32_t> facts) const;
  // [B,G] batch of the above.
  grad::Tensor valuation(const std::vector<std::vector<int32_t>>& fact_rows) const;

 private:
  logic::GroundedProgram gp_;
  ReasonerConfig cfg_;
  IndexTensor idx_;
  grad::Tensor pin_mask_;  // [G], zero on the reserved slots
  grad::Tensor top_row_;   // [G], one on the top slot
};

// Soft disjunction over one axis: clamp(gamma*log sum exp(x/gamma), 0, 1).
grad::Tape::Id softor(grad::Tape& t, grad::Tape::Id xs, int axis, double gamma);

}  // namespace hyrl::reason

#endif  // HYRL_REASON_REASONER_HPP_
