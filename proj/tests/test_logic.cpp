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
#include <string>
#include <vector>

#include "doctest.h"
#include "hyrl/logic/chain.hpp"
#include "hyrl/logic/ground.hpp"
#include "hyrl/logic/parser.hpp"
#include "hyrl/util/counters.hpp"

using namespace hyrl::logic;

namespace {

const char* kPathProgram =
    "# three objects, reachability\n"
    "const obj: a, b, c\n"
    "pred edge/2: obj, obj\n"
    "pred path/2: obj, obj\n"
    "path(X,Y) :- edge(X,Y).\n"
    "path(X,Z) :- edge(X,Y), path(Y,Z).\n";

int check_parse_error(const std::string& text) {
  try {
    parse_program(text);
  } catch (const ParseError& e) {
    CHECK(e.line > 0);
    CHECK(e.col > 0);
    return e.line * 1000 + e.col;
  }
  FAIL("expected a parse error");
  return 0;
}

}  // namespace

TEST_CASE("universe layout is bottom, top, then declaration-ordered blocks") {
  Program p = parse_program(kPathProgram);
  REQUIRE(p.num_atoms() == 2 + 9 + 9);
  CHECK(p.atom_name(kBottomAtom) == "$F");
  CHECK(p.atom_name(kTopAtom) == "$T");
  CHECK(p.atom_name(2) == "edge(a,a)");
  CHECK(p.atom_name(3) == "edge(a,b)");
  CHECK(p.atom_name(4) == "edge(a,c)");
  CHECK(p.atom_name(5) == "edge(b,a)");
  CHECK(p.atom_name(10) == "edge(c,c)");
  CHECK(p.atom_name(11) == "path(a,a)");
  CHECK(p.find_atom("path(c,c)") == 19);
  CHECK(p.find_atom("edge(a,b)") == 3);
  CHECK(p.find_atom("nope(a)") == -1);
  CHECK(p.find_atom("$T") == kTopAtom);
}

TEST_CASE("parse errors carry the offending position") {
  // Undeclared predicate in a rule body.
  CHECK(check_parse_error("const obj: a, b\n"
                          "pred edge/2: obj, obj\n"
                          "edge(a,b) :- foo(a).\n") == 3014);
  // Wrong argument count.
  CHECK(check_parse_error("const obj: a, b\n"
                          "pred edge/2: obj, obj\n"
                          "edge(a) :- edge(a,b).\n") == 3001);
  // Undeclared constant.
  CHECK(check_parse_error("const obj: a, b\n"
                          "pred edge/2: obj, obj\n"
                          "edge(a,zz) :- edge(a,b).\n") == 3008);
  // Variable typed two ways.
  CHECK(check_parse_error("const obj: a\n"
                          "const num: n1\n"
                          "pred p/1: obj\n"
                          "pred q/1: num\n"
                          "p(X) :- q(X).\n") == 5011);
  // Missing terminating dot.
  CHECK(check_parse_error("const obj: a\n"
                          "pred p/1: obj\n"
                          "p(a) :- p(a)\n") == 3013);
  // Redeclared predicate.
  CHECK(check_parse_error("const obj: a\n"
                          "pred p/1: obj\n"
                          "pred p/1: obj\n") == 3006);
  // Reserved word as a constant.
  CHECK(check_parse_error("const obj: pred\n") == 1012);
  // Undeclared datatype in a predicate declaration.
  CHECK(check_parse_error("pred p/1: obj\n") == 1011);
  // Constant where the declared type differs.
  CHECK(check_parse_error("const obj: a\n"
                          "const num: n1\n"
                          "pred p/1: obj\n"
                          "p(n1) :- p(a).\n") == 4003);
}

TEST_CASE("universe cap is enforced") {
  std::string text = "const obj: c0";
  for (int i = 1; i < 40; ++i) text += ", c" + std::to_string(i);
  text += "\npred p/3: obj, obj, obj\n";  // 64000 atoms
  CHECK_NOTHROW(parse_program(text));
  CHECK_THROWS_AS(parse_program(text, 1000), GroundingError);
}

TEST_CASE("pretty printing round-trips") {
  Program p = parse_program(kPathProgram);
  std::string printed = pretty_print(p);
  Program q = parse_program(printed);
  CHECK(pretty_print(q) == printed);
  CHECK(q.num_atoms() == p.num_atoms());
  REQUIRE(q.clauses.size() == p.clauses.size());
  CHECK(to_string(q, q.clauses[1].head) == "path(X,Z)");
}

TEST_CASE("grounding enumerates name-sorted variables lexicographically") {
  GroundedProgram gp = ground_program(parse_program(kPathProgram));
  CHECK(gp.num_atoms == 20);
  CHECK(gp.max_body == 2);
  // In the transitive clause the middle object is free given the head.
  CHECK(gp.max_paths == 3);
  REQUIRE(gp.clauses.size() == 2);
  CHECK(gp.clauses[0].instances.size() == 9);
  CHECK(gp.clauses[1].instances.size() == 27);

  const Program& p = gp.program;
  // First transitive instance: X=a, Y=a, Z=a.
  const GroundInstance& first = gp.clauses[1].instances.front();
  CHECK(p.atom_name(first.head) == "path(a,a)");
  REQUIRE(first.body.size() == 2);
  CHECK(p.atom_name(first.body[0]) == "edge(a,a)");
  CHECK(p.atom_name(first.body[1]) == "path(a,a)");
  // Second instance advances the last variable: X=a, Y=a, Z=b.
  const GroundInstance& second = gp.clauses[1].instances[1];
  CHECK(p.atom_name(second.head) == "path(a,b)");
  CHECK(p.atom_name(second.body[1]) == "path(a,b)");
  // Last instance: X=c, Y=c, Z=c.
  const GroundInstance& last = gp.clauses[1].instances.back();
  CHECK(p.atom_name(last.head) == "path(c,c)");
  CHECK(p.atom_name(last.body[0]) == "edge(c,c)");

  GroundedProgram gp2 = ground_program(parse_program(kPathProgram));
  REQUIRE(gp2.clauses.size() == gp.clauses.size());
  for (size_t i = 0; i < gp.clauses.size(); ++i) {
    REQUIRE(gp2.clauses[i].instances.size() == gp.clauses[i].instances.size());
    for (size_t j = 0; j < gp.clauses[i].instances.size(); ++j) {
      CHECK(gp2.clauses[i].instances[j].head == gp.clauses[i].instances[j].head);
      CHECK(gp2.clauses[i].instances[j].body == gp.clauses[i].instances[j].body);
    }
  }
}

TEST_CASE("forward chaining derives one round per step") {
  Program p = parse_program(
      "const u: x\n"
      "pred p0/0\npred p1/0\npred p2/0\npred p3/0\n"
      "p1 :- p0.\n"
      "p2 :- p1.\n"
      "p3 :- p2.\n");
  GroundedProgram gp = ground_program(p);
  std::vector<int32_t> facts = {p.find_atom("p0")};
  auto at = [&](const std::vector<uint8_t>& v, const char* name) {
    return v[p.find_atom(name)] != 0;
  };

  auto v0 = exact_forward_chain(gp, facts, 0);
  CHECK(at(v0, "p0"));
  CHECK_FALSE(at(v0, "p1"));
  auto v1 = exact_forward_chain(gp, facts, 1);
  CHECK(at(v1, "p1"));
  CHECK_FALSE(at(v1, "p2"));
  auto v2 = exact_forward_chain(gp, facts, 2);
  CHECK(at(v2, "p2"));
  CHECK_FALSE(at(v2, "p3"));
  auto v3 = exact_forward_chain(gp, facts, 3);
  CHECK(at(v3, "p3"));
  CHECK(v3 == exact_forward_chain(gp, facts, 100));
}

TEST_CASE("forward chaining is monotone and fixes within universe size") {
  Program p = parse_program(kPathProgram);
  GroundedProgram gp = ground_program(p);
  std::vector<int32_t> facts = {p.find_atom("edge(a,b)"), p.find_atom("edge(b,c)")};

  std::vector<uint8_t> prev = exact_forward_chain(gp, facts, 0);
  for (int t = 1; t <= 5; ++t) {
    std::vector<uint8_t> cur = exact_forward_chain(gp, facts, t);
    for (size_t i = 0; i < cur.size(); ++i) {
      if (prev[i]) CHECK(cur[i]);  // no atom is ever retracted
    }
    CHECK(cur[kTopAtom] == 1);
    CHECK(cur[kBottomAtom] == 0);
    prev = cur;
  }
  auto fix = exact_forward_chain(gp, facts, static_cast<int>(gp.num_atoms));
  CHECK(fix == exact_forward_chain(gp, facts, 10 * static_cast<int>(gp.num_atoms)));
  CHECK(fix[p.find_atom("path(a,b)")]);
  CHECK(fix[p.find_atom("path(b,c)")]);
  CHECK(fix[p.find_atom("path(a,c)")]);
  CHECK_FALSE(fix[p.find_atom("path(c,a)")]);
  CHECK_FALSE(fix[p.find_atom("path(a,a)")]);
  CHECK_FALSE(fix[p.find_atom("edge(a,c)")]);  // rules never add base facts

  // Exactly one new round of consequences per step.
  auto v2 = exact_forward_chain(gp, facts, 2);
  auto v1 = exact_forward_chain(gp, facts, 1);
  CHECK(v1[p.find_atom("path(a,b)")]);
  CHECK_FALSE(v1[p.find_atom("path(a,c)")]);
  CHECK(v2[p.find_atom("path(a,c)")]);
}

TEST_CASE("forward chaining rejects bad facts and counts invocations") {
  Program p = parse_program(kPathProgram);
  GroundedProgram gp = ground_program(p);
  auto before = hyrl::util::snapshot_counters();
  std::vector<int32_t> ok = {p.find_atom("edge(a,b)")};
  exact_forward_chain(gp, ok, 1);
  auto after = hyrl::util::snapshot_counters();
  CHECK(after.exact_chain_calls == before.exact_chain_calls + 1);

  std::vector<int32_t> bottom = {kBottomAtom};
  CHECK_THROWS_AS(exact_forward_chain(gp, bottom, 1), std::invalid_argument);
  std::vector<int32_t> oob = {static_cast<int32_t>(gp.num_atoms)};
  CHECK_THROWS_AS(exact_forward_chain(gp, oob, 1), std::out_of_range);
}
