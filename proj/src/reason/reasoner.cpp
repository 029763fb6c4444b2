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

#include "hyrl/reason/reasoner.hpp"

#include <stdexcept>
#include <string>
#include <utility>

#include "hyrl/util/counters.hpp"

namespace hyrl::reason {

using grad::Tape;
using grad::Tensor;
using logic::kBottomAtom;
using logic::kTopAtom;

IndexTensor compile_indices(const logic::GroundedProgram& gp) {
  IndexTensor out;
  out.num_clauses = static_cast<int64_t>(gp.clauses.size());
  out.num_atoms = gp.num_atoms;
  out.max_paths = gp.max_paths;
  out.max_body = gp.max_body;
  const int64_t g = out.num_atoms, s = out.max_paths, l = out.max_body;
  std::vector<int32_t> used(static_cast<size_t>(g));
  for (const logic::GroundedClause& gc : gp.clauses) {
    auto rows = std::make_shared<std::vector<int64_t>>(
        static_cast<size_t>(g * s * l), kTopAtom);
    for (int64_t j = 0; j < g; ++j)
      for (int64_t k = 0; k < s; ++k) (*rows)[static_cast<size_t>((j * s + k) * l)] = kBottomAtom;
    std::fill(used.begin(), used.end(), 0);
    for (const logic::GroundInstance& gi : gc.instances) {
      int64_t k = used[static_cast<size_t>(gi.head)]++;
      int64_t base = (gi.head * s + k) * l;
      for (size_t b = 0; b < gi.body.size(); ++b)
        (*rows)[static_cast<size_t>(base) + b] = gi.body[b];
      for (size_t b = gi.body.size(); b < static_cast<size_t>(l); ++b)
        (*rows)[static_cast<size_t>(base) + b] = kTopAtom;
    }
    out.rows.push_back(std::move(rows));
  }
  return out;
}

RuleWeights RuleWeights::zeros(int64_t slots, int64_t clauses) {
  return {Tensor({slots, clauses}, 0.0)};
}

RuleWeights RuleWeights::identity(int64_t clauses, double scale) {
  RuleWeights rw = zeros(clauses, clauses);
  for (int64_t i = 0; i < clauses; ++i) rw.w.at2(i, i) = scale;
  return rw;
}

void RuleWeights::one_hot(int64_t slot, int64_t clause, double on, double off) {
  for (int64_t c = 0; c < clauses(); ++c) w.at2(slot, c) = c == clause ? on : off;
}

Reasoner::Reasoner(logic::GroundedProgram gp, ReasonerConfig cfg)
    : gp_(std::move(gp)), cfg_(cfg), idx_(compile_indices(gp_)) {
  if (cfg_.gamma <= 0) throw std::invalid_argument("gamma must be positive");
  if (cfg_.steps < 0) throw std::invalid_argument("steps must be nonnegative");
  pin_mask_ = Tensor({gp_.num_atoms}, 1.0);
  pin_mask_.vec()[kBottomAtom] = 0.0;
  pin_mask_.vec()[kTopAtom] = 0.0;
  top_row_ = Tensor({gp_.num_atoms}, 0.0);
  top_row_.vec()[kTopAtom] = 1.0;
}

Tape::Id Reasoner::infer_step(Tape& t, Tape::Id v, Tape::Id w_soft) const {
  util::Counters::instance().reasoner_step_calls.fetch_add(1, std::memory_order_relaxed);
  const auto& vshape = t.value(v).shape();
  if (vshape.size() != 2 || vshape[1] != idx_.num_atoms) {
    throw std::invalid_argument("valuation must be [batch, " +
                                std::to_string(idx_.num_atoms) + "]");
  }
  const auto& wshape = t.value(w_soft).shape();
  if (wshape.size() != 2 || wshape[1] != idx_.num_clauses) {
    throw std::invalid_argument("weights must be [slots, " +
                                std::to_string(idx_.num_clauses) + "]");
  }
  const int64_t b = vshape[0], g = idx_.num_atoms, s = idx_.max_paths,
                l = idx_.max_body;
  const double gamma = cfg_.gamma;

  // Per-clause conjunction of body values, merged over derivation paths.
  std::vector<Tape::Id> clause_vals;
  clause_vals.reserve(static_cast<size_t>(idx_.num_clauses));
  for (const auto& rows : idx_.rows) {
    Tape::Id gathered = t.gather_cols(v, rows);                  // [B, G*S*L]
    Tape::Id cube = t.reshape(gathered, {b, g, s, l});
    Tape::Id conj = t.prod_reduce(cube, 3);                      // [B, G, S]
    clause_vals.push_back(t.lse_excess(conj, 2, gamma));         // [B, G]
  }
  // Rule slots mix clauses; slots then merge like paths.
  Tape::Id stacked = t.reshape(t.stack(clause_vals), {idx_.num_clauses, b * g});
  Tape::Id mixed = t.matmul(w_soft, stacked);                    // [slots, B*G]
  Tape::Id derived = t.reshape(t.lse_excess(mixed, 0, gamma), {b, g});
  // Fold into the previous valuation and restore the pinned slots. The
  // floor-free merge leaves untouched atoms exactly untouched, so inert
  // programs are fixed points instead of drifting by gamma*log(2) per step.
  Tape::Id merged = t.clamp(t.logaddexp_excess(derived, v, gamma), 0.0, 1.0);
  return t.add_rowvec(t.scale_cols(merged, t.constant(pin_mask_)),
                      t.constant(top_row_));
}

Tape::Id Reasoner::forward(Tape& t, Tape::Id v0, Tape::Id w_raw) const {
  util::Counters::instance().reasoner_forward_calls.fetch_add(
      1, std::memory_order_relaxed);
  Tape::Id w_soft = t.softmax(w_raw);
  // Pin the reserved slots up front so arbitrary leaf inputs stay legal.
  Tape::Id v = t.add_rowvec(t.scale_cols(v0, t.constant(pin_mask_)),
                            t.constant(top_row_));
  for (int i = 0; i < cfg_.steps; ++i) v = infer_step(t, v, w_soft);
  return v;
}

Tensor Reasoner::evaluate(const Tensor& v0, const RuleWeights& rw) const {
  Tape t;
  Tape::Id v = t.constant(v0);
  Tape::Id w = t.constant(rw.w);
  return t.value(forward(t, v, w));
}

Tensor Reasoner::valuation(std::span<const int32_t> facts) const {
  Tensor v({1, gp_.num_atoms}, 0.0);
  v.vec()[kTopAtom] = 1.0;
  for (int32_t f : facts) {
    if (f <= kBottomAtom || f >= gp_.num_atoms) {
      throw std::out_of_range("fact index " + std::to_string(f) +
                              " outside the universe");
    }
    v.vec()[static_cast<size_t>(f)] = 1.0;
  }
  return v;
}

Tensor Reasoner::valuation(const std::vector<std::vector<int32_t>>& fact_rows) const {
  const int64_t bsize = static_cast<int64_t>(fact_rows.size());
  Tensor v({bsize, gp_.num_atoms}, 0.0);
  for (int64_t row = 0; row < bsize; ++row) {
    double* base = v.vec().data() + row * gp_.num_atoms;
    base[kTopAtom] = 1.0;
    for (int32_t f : fact_rows[static_cast<size_t>(row)]) {
      if (f <= kBottomAtom || f >= gp_.num_atoms) {
        throw std::out_of_range("fact index " + std::to_string(f) +
                                " outside the universe");
      }
      base[f] = 1.0;
    }
  }
  return v;
}

Tape::Id softor(Tape& t, Tape::Id xs, int axis, double gamma) {
  return t.clamp(t.lse(xs, axis, gamma), 0.0, 1.0);
}

}  // namespace hyrl::reason
