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

#ifndef HYRL_LOGIC_PARSER_HPP_
#define HYRL_LOGIC_PARSER_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include "hyrl/logic/program.hpp"

namespace hyrl::logic {

struct ParseError : std::runtime_error {
  ParseError(int line, int col, const std::string& msg);
  int line = 0;
  int col = 0;
};

// Rule-file format, one statement per line:
//   # comment to end of line
//   pred name/arity: type1, ..., typeN     (omit the colon for arity 0)
//   const type: c1, c2, ...                (repeats append to the type)
//   head :- b1, ..., bn.
// Identifiers starting with an uppercase letter are variables; everything
// else must be a declared predicate, datatype, or constant. Declarations
// must precede use. A variable's datatype is fixed by its first occurrence
// and must agree everywhere else in the clause.
//
// Parsing also enumerates the ground-atom universe (bottom, top, then all
// instantiations per predicate); universes larger than max_ground_atoms
// are rejected.
Program parse_program(const std::string& text, int64_t max_ground_atoms = 100000);

// Inverse of parse_program up to comments and whitespace:
// parse_program(pretty_print(p)) reproduces p.
std::string pretty_print(const Program& p);

}  // namespace hyrl::logic

#endif  // HYRL_LOGIC_PARSER_HPP_
