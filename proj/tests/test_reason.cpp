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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "hyrl/grad/check.hpp"
#include "hyrl/logic/chain.hpp"
#include "hyrl/logic/parser.hpp"
#include "hyrl/reason/reasoner.hpp"
#include "hyrl/util/counters.hpp"
#include "hyrl/util/rng.hpp"

using namespace hyrl;
using namespace hyrl::reason;
using grad::Tape;
using grad::Tensor;

namespace {

const char* kPathProgram =
    "const obj: a, b, c\n"
    "pred edge/2: obj, obj\n"
    "pred path/2: obj, obj\n"
    "path(X,Y) :- edge(X,Y).\n"
    "path(X,Z) :- edge(X,Y), path(Y,Z).\n";

Reasoner make_path_reasoner(ReasonerConfig cfg = {}) {
  return Reasoner(logic::ground_program(logic::parse_program(kPathProgram)), cfg);
}

RuleWeights diagonal_one_hot(int64_t clauses) {
  RuleWeights rw = RuleWeights::zeros(clauses, clauses);
  for (int64_t i = 0; i < clauses; ++i) rw.one_hot(i, i);
  return rw;
}

std::vector<int32_t> facts_by_name(const logic::Program& p,
                                   const std::vector<std::string>& names) {
  std::vector<int32_t> out;
  for (const auto& n : names) {
    int32_t idx = p.find_atom(n);
    REQUIRE(idx >= 0);
    out.push_back(idx);
  }
  return out;
}

}  // namespace

TEST_CASE("index rows pad paths with bottom and short bodies with top") {
  Reasoner r = make_path_reasoner();
  const IndexTensor& ix = r.indices();
  CHECK(ix.num_clauses == 2);
  CHECK(ix.num_atoms == 20);
  CHECK(ix.max_paths == 3);
  CHECK(ix.max_body == 2);
  const logic::Program& p = r.program();

  // Clause 0 derives path(a,b) one way: body edge(a,b), then top padding.
  const auto& c0 = *ix.rows[0];
  int64_t j = p.find_atom("path(a,b)");
  int64_t base = (j * 3 + 0) * 2;
  CHECK(c0[base] == p.find_atom("edge(a,b)"));
  CHECK(c0[base + 1] == logic::kTopAtom);
  // Remaining path slots are dead: bottom then top.
  CHECK(c0[base + 2] == logic::kBottomAtom);
  CHECK(c0[base + 3] == logic::kTopAtom);
  // Clause 0 never derives edge atoms: all slots dead.
  int64_t e = p.find_atom("edge(b,c)");
  for (int64_t k = 0; k < 3; ++k) {
    CHECK(c0[(e * 3 + k) * 2] == logic::kBottomAtom);
    CHECK(c0[(e * 3 + k) * 2 + 1] == logic::kTopAtom);
  }
  // Clause 1 derives path(a,c) three ways, middle object free.
  const auto& c1 = *ix.rows[1];
  int64_t pac = p.find_atom("path(a,c)");
  CHECK(c1[(pac * 3 + 0) * 2] == p.find_atom("edge(a,a)"));
  CHECK(c1[(pac * 3 + 0) * 2 + 1] == p.find_atom("path(a,c)"));
  CHECK(c1[(pac * 3 + 1) * 2] == p.find_atom("edge(a,b)"));
  CHECK(c1[(pac * 3 + 1) * 2 + 1] == p.find_atom("path(b,c)"));
  CHECK(c1[(pac * 3 + 2) * 2] == p.find_atom("edge(a,c)"));
  CHECK(c1[(pac * 3 + 2) * 2 + 1] == p.find_atom("path(c,c)"));
}

TEST_CASE("hard weights reproduce crisp chaining with wide margins") {
  Reasoner r = make_path_reasoner({5, 0.01});
  const logic::Program& p = r.program();
  RuleWeights rw = diagonal_one_hot(2);
  util::Rng rng(20260818);

  for (int trial = 0; trial < 12; ++trial) {
    std::vector<int32_t> facts;
    for (int32_t atom = 2; atom < 11; ++atom) {  // edge block
      if (rng.uniform() < 0.35) facts.push_back(atom);
    }
    Tensor v = r.evaluate(r.valuation(facts), rw);
    std::vector<uint8_t> crisp = exact_forward_chain(r.grounded(), facts, 5);
    for (int64_t g = 0; g < r.grounded().num_atoms; ++g) {
      double soft = v.vec()[static_cast<size_t>(g)];
      if (crisp[static_cast<size_t>(g)]) {
        CHECK(soft >= 0.99);
      } else {
        CHECK(soft <= 1e-9);
      }
    }
    CHECK(v.vec()[logic::kBottomAtom] == 0.0);
    CHECK(v.vec()[logic::kTopAtom] == 1.0);
  }
  (void)p;
}

TEST_CASE("unsupported atoms are exact fixed points") {
  Reasoner r = make_path_reasoner({5, 0.01});
  RuleWeights rw = diagonal_one_hot(2);
  const logic::Program& p = r.program();
  // No facts: nothing fires and the valuation is reproduced exactly.
  Tensor vin = r.valuation(std::vector<int32_t>{});
  Tensor v5 = r.evaluate(vin, rw);
  for (int64_t i = 0; i < v5.size(); ++i) CHECK(v5.at(i) == vin.at(i));

  // Facts stay saturated at exactly one; underivable atoms stay near zero
  // even with softer weights feeding cross-clause leakage.
  std::vector<int32_t> facts = facts_by_name(p, {"edge(a,b)"});
  Tensor vf = r.evaluate(r.valuation(facts), rw);
  CHECK(vf.vec()[static_cast<size_t>(p.find_atom("edge(a,b)"))] == 1.0);
  CHECK(vf.vec()[static_cast<size_t>(p.find_atom("edge(c,a)"))] <= 1e-12);
  CHECK(vf.vec()[static_cast<size_t>(p.find_atom("path(b,a)"))] <= 1e-12);
  CHECK(vf.vec()[logic::kBottomAtom] == 0.0);
  CHECK(vf.vec()[logic::kTopAtom] == 1.0);
}

TEST_CASE("valuations grow monotonically over steps") {
  const logic::Program p = logic::parse_program(kPathProgram);
  logic::GroundedProgram gp = logic::ground_program(p);
  RuleWeights rw = diagonal_one_hot(2);
  std::vector<int32_t> facts = facts_by_name(p, {"edge(a,b)", "edge(b,c)"});
  Tensor prev;
  for (int steps = 0; steps <= 6; ++steps) {
    Reasoner r(gp, {steps, 0.01});
    Tensor v = r.evaluate(r.valuation(facts), rw);
    if (steps > 0) {
      for (int64_t i = 0; i < v.size(); ++i) {
        CHECK(v.at(i) >= prev.at(i) - 1e-15);
      }
    }
    prev = v;
  }
}

TEST_CASE("constant relabeling permutes valuations exactly") {
  const char* shuffled =
      "const obj: c, a, b\n"
      "pred edge/2: obj, obj\n"
      "pred path/2: obj, obj\n"
      "path(X,Y) :- edge(X,Y).\n"
      "path(X,Z) :- edge(X,Y), path(Y,Z).\n";
  Reasoner r1 = make_path_reasoner({5, 0.01});
  Reasoner r2(logic::ground_program(logic::parse_program(shuffled)), {5, 0.01});
  RuleWeights rw = diagonal_one_hot(2);
  std::vector<std::string> fact_names = {"edge(a,b)", "edge(b,c)", "edge(c,a)"};
  Tensor v1 = r1.evaluate(r1.valuation(facts_by_name(r1.program(), fact_names)), rw);
  Tensor v2 = r2.evaluate(r2.valuation(facts_by_name(r2.program(), fact_names)), rw);
  for (int64_t g = 0; g < r1.grounded().num_atoms; ++g) {
    std::string name = r1.program().atom_name(static_cast<int32_t>(g));
    int32_t other = r2.program().find_atom(name);
    REQUIRE(other >= 0);
    CHECK(v1.vec()[static_cast<size_t>(g)] ==
          doctest::Approx(v2.vec()[static_cast<size_t>(other)]).epsilon(1e-12));
  }
}

TEST_CASE("batched rows match independent single-row runs") {
  Reasoner r = make_path_reasoner({3, 0.05});
  const logic::Program& p = r.program();
  RuleWeights rw = RuleWeights::identity(2, 5.0);
  std::vector<std::vector<int32_t>> rows = {
      facts_by_name(p, {"edge(a,b)"}),
      facts_by_name(p, {"edge(b,c)", "edge(c,a)"}),
  };
  Tensor batched = r.evaluate(r.valuation(rows), rw);
  for (size_t b = 0; b < rows.size(); ++b) {
    Tensor single = r.evaluate(r.valuation(rows[b]), rw);
    for (int64_t g = 0; g < r.grounded().num_atoms; ++g) {
      CHECK(batched.at2(static_cast<int64_t>(b), g) ==
            doctest::Approx(single.vec()[static_cast<size_t>(g)]).epsilon(1e-14));
    }
  }
}

TEST_CASE("gradients through soft chaining match finite differences") {
  Reasoner r = make_path_reasoner({2, 0.1});
  const logic::Program& p = r.program();
  const int64_t g = r.grounded().num_atoms;

  // Soft facts keep every op away from clamp corners.
  Tensor v0({1, g}, 0.0);
  v0.vec()[logic::kTopAtom] = 1.0;
  util::Rng rng(7);
  for (int64_t i = 2; i < g; ++i) v0.vec()[static_cast<size_t>(i)] = rng.uniform(0.15, 0.55);
  Tensor w0({2, 2}, 0.0);
  w0.at2(0, 0) = 1.2;
  w0.at2(0, 1) = -0.4;
  w0.at2(1, 0) = 0.3;
  w0.at2(1, 1) = 0.9;

  int32_t probe = p.find_atom("path(a,c)");
  auto fn = [&](Tape& t, const std::vector<Tape::Id>& in) {
    Tape::Id out = r.forward(t, in[0], in[1]);
    return t.index_scalar(out, probe);
  };
  CHECK(grad::check_gradients(fn, {v0, w0}) <= 2e-4);

  // Weight gradients actually arrive.
  Tape t;
  Tape::Id vid = t.input(v0);
  Tape::Id wid = t.input(w0);
  t.backward(t.index_scalar(r.forward(t, vid, wid), probe));
  REQUIRE(t.has_grad(wid));
  double wnorm = 0;
  for (double x : t.grad(wid).vec()) wnorm += x * x;
  CHECK(wnorm > 1e-12);
}

TEST_CASE("forward and step invocations are counted") {
  Reasoner r = make_path_reasoner({4, 0.01});
  RuleWeights rw = RuleWeights::identity(2);
  auto before = util::snapshot_counters();
  r.evaluate(r.valuation(std::vector<int32_t>{}), rw);
  auto after = util::snapshot_counters();
  CHECK(after.reasoner_forward_calls == before.reasoner_forward_calls + 1);
  CHECK(after.reasoner_step_calls == before.reasoner_step_calls + 4);
  CHECK_FALSE(util::pure_neural_since(before));
}

TEST_CASE("standalone soft disjunction keeps the documented floor") {
  Tape t;
  Tape::Id xs = t.constant(Tensor::from({2}, {0.0, 0.0}));
  CHECK(t.scalar(softor(t, xs, 0, 0.01)) ==
        doctest::Approx(0.01 * std::log(2.0)).epsilon(1e-12));
  Tape::Id big = t.constant(Tensor::from({3}, {1.0, 1.0, 1.0}));
  CHECK(t.scalar(softor(t, big, 0, 0.01)) == 1.0);  // clamped
  Tape::Id one = t.constant(Tensor::from({2}, {0.7, 0.0}));
  CHECK(t.scalar(softor(t, one, 0, 0.01)) == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("weight helpers shape the softmax as documented") {
  RuleWeights id = RuleWeights::identity(3, 5.0);
  Tape t;
  Tensor sm = t.value(t.softmax(t.constant(id.w)));
  double diag = std::exp(5.0) / (std::exp(5.0) + 2.0);
  for (int64_t i = 0; i < 3; ++i)
    CHECK(sm.at2(i, i) == doctest::Approx(diag).epsilon(1e-12));

  RuleWeights oh = RuleWeights::zeros(2, 3);
  oh.one_hot(0, 2);
  oh.one_hot(1, 0);
  Tensor sm2 = t.value(t.softmax(t.constant(oh.w)));
  CHECK(sm2.at2(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sm2.at2(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sm2.at2(0, 0) < 1e-20);
}
