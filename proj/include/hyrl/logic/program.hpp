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

#ifndef HYRL_LOGIC_PROGRAM_HPP_
#define HYRL_LOGIC_PROGRAM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hyrl::logic {

// Reserved ground-atom slots. Valuations pin index 0 to 0 and index 1 to 1.
inline constexpr int32_t kBottomAtom = 0;
inline constexpr int32_t kTopAtom = 1;

struct Predicate {
  std::string name;
  int32_t arity = 0;
  std::vector<int32_t> arg_types;  // datatype ids, one per argument
};

struct Term {
  enum class Kind : uint8_t { kConst, kVar };
  Kind kind = Kind::kConst;
  int32_t id = -1;    // constant: index within its datatype; variable: clause-local id
  std::string name;   // source spelling
};

struct Atom {
  int32_t pred = -1;
  std::vector<Term> args;
};

struct Clause {
  Atom head;
  std::vector<Atom> body;
  // Clause-local variable table, sorted by name; Term::id indexes it.
  std::vector<std::string> vars;
  std::vector<int32_t> var_types;
};

struct GroundAtom {
  int32_t pred = -1;               // -1 for the reserved bottom/top slots
  std::vector<int32_t> args;       // constant indices
};

// A parsed rule set plus its ground-atom universe. Universe order is fixed:
// bottom, top, then every instantiation of each declared predicate in
// declaration order with argument tuples in lexicographic constant order.
struct Program {
  std::vector<std::string> datatypes;
  std::vector<std::vector<std::string>> constants;  // per datatype, declaration order
  std::vector<Predicate> predicates;
  std::vector<Clause> clauses;

  std::vector<GroundAtom> ground_atoms;
  std::map<std::string, int32_t> atom_index;  // canonical text -> universe index

  std::map<std::string, int32_t> predicate_index;
  std::map<std::string, int32_t> datatype_index;
  std::map<std::string, std::pair<int32_t, int32_t>> constant_index;  // name -> (type, id)

  int64_t num_atoms() const { return static_cast<int64_t>(ground_atoms.size()); }
  std::string atom_name(int32_t idx) const;
  // Index of a ground atom, -1 when absent from the universe.
  int32_t find_atom(const std::string& canonical) const;
};

std::string to_string(const Program& p, const Atom& a);

}  // namespace hyrl::logic

#endif  // HYRL_LOGIC_PROGRAM_HPP_
