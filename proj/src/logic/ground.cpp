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

#include "hyrl/logic/ground.hpp"

#include <map>
#include <string>

namespace hyrl::logic {
namespace {

// Universe index of `a` under the substitution in `binding`. Relies on the
// universe layout: per-predicate blocks with lexicographic argument tuples.
int32_t instantiate(const Program& p, const std::map<std::string, int32_t>& base,
                    const Atom& a, const std::vector<int32_t>& binding) {
  const Predicate& pred = p.predicates[a.pred];
  int64_t offset = 0;
  for (int32_t i = 0; i < pred.arity; ++i) {
    const Term& t = a.args[i];
    int32_t c = t.kind == Term::Kind::kVar ? binding[t.id] : t.id;
    offset = offset * static_cast<int64_t>(p.constants[pred.arg_types[i]].size()) + c;
  }
  return static_cast<int32_t>(base.at(pred.name) + offset);
}

}  // namespace

GroundedProgram ground_program(const Program& p) {
  GroundedProgram gp;
  gp.program = p;
  gp.num_atoms = p.num_atoms();

  // Start of each predicate's block in the universe.
  std::map<std::string, int32_t> base;
  int32_t next = 2;
  for (const Predicate& pred : p.predicates) {
    base[pred.name] = next;
    int64_t n = 1;
    for (int32_t t : pred.arg_types) n *= static_cast<int64_t>(p.constants[t].size());
    next += static_cast<int32_t>(n);
  }

  for (const Clause& cl : p.clauses) {
    GroundedClause gc;
    gp.max_body = std::max(gp.max_body, static_cast<int64_t>(cl.body.size()));
    std::vector<int32_t> domain(cl.vars.size());
    bool empty_domain = false;
    for (size_t v = 0; v < cl.vars.size(); ++v) {
      domain[v] = static_cast<int32_t>(p.constants[cl.var_types[v]].size());
      empty_domain |= domain[v] == 0;
    }
    if (!empty_domain) {
      std::vector<int32_t> binding(cl.vars.size(), 0);
      std::map<int32_t, int64_t> per_head;
      while (true) {
        GroundInstance gi;
        gi.head = instantiate(p, base, cl.head, binding);
        gi.body.reserve(cl.body.size());
        for (const Atom& a : cl.body) gi.body.push_back(instantiate(p, base, a, binding));
        gp.max_paths = std::max(gp.max_paths, ++per_head[gi.head]);
        gc.instances.push_back(std::move(gi));
        // Advance the last variable first: name-lexicographic substitution order.
        int32_t v = static_cast<int32_t>(binding.size()) - 1;
        for (; v >= 0; --v) {
          if (++binding[v] < domain[v]) break;
          binding[v] = 0;
        }
        if (v < 0) break;
      }
    }
    gp.clauses.push_back(std::move(gc));
  }
  if (gp.max_paths == 0) gp.max_paths = 1;
  if (gp.max_body == 0) gp.max_body = 1;
  return gp;
}

}  // namespace hyrl::logic
