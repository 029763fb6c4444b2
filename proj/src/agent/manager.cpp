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

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "hyrl/agent/agent.hpp"
#include "hyrl/logic/ground.hpp"
#include "hyrl/logic/parser.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::agent {

LogicManager::LogicManager(std::string rule_text, reason::ReasonerConfig rcfg)
    : rule_text_(std::move(rule_text)), digest_(util::fnv1a(rule_text_)) {
  logic::Program p = logic::parse_program(rule_text_);
  reasoner_ = std::make_unique<reason::Reasoner>(logic::ground_program(p), rcfg);
  int64_t clauses = static_cast<int64_t>(program().clauses.size());
  if (clauses == 0) throw std::invalid_argument("rule file declares no rules");
  theta_ = reason::RuleWeights::identity(clauses);

  options_ = options::rule_head_options(program());
  head_atoms_.resize(options_.size());
  const auto& atoms = program().ground_atoms;
  for (size_t o = 0; o < options_.size(); ++o) {
    int32_t pred = program().predicate_index.at(options_[o]);
    for (size_t j = 0; j < atoms.size(); ++j)
      if (atoms[j].pred == pred) head_atoms_[o].push_back(static_cast<int64_t>(j));
    if (head_atoms_[o].empty())
      throw std::runtime_error("missing option head in universe: " + options_[o]);
  }
}

LogicManager LogicManager::from_file(const std::string& path,
                                     reason::ReasonerConfig rcfg) {
  return LogicManager(util::read_file(path), rcfg);
}

const logic::Program& LogicManager::program() const {
  return reasoner_->program();
}

grad::Tensor LogicManager::v0_from_facts(const Facts& z) const {
  grad::Tensor v0(std::vector<int64_t>{1, program().num_atoms()});
  v0.at(logic::kTopAtom) = 1.0;
  for (const auto& [atom, truth] : z) {
    int32_t idx = program().find_atom(atom);
    if (idx >= 0) v0.at(idx) = truth ? 1.0 : 0.0;
  }
  return v0;
}

std::vector<double> LogicManager::head_valuations(const Facts& z) const {
  // v0 depends only on the set of true atoms, so memoize on that set.
  std::string key;
  {
    std::vector<std::string> on;
    for (const auto& [atom, truth] : z)
      if (truth && program().find_atom(atom) >= 0) on.push_back(atom);
    std::sort(on.begin(), on.end());
    for (const auto& a : on) {
      key += a;
      key += '|';
    }
  }
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  grad::Tensor v = reasoner_->evaluate(v0_from_facts(z), theta_);
  std::vector<double> vals(options_.size(), 0.0);
  for (size_t o = 0; o < options_.size(); ++o)
    for (int64_t j : head_atoms_[o]) vals[o] = std::max(vals[o], v.at(j));
  cache_.emplace(std::move(key), vals);
  return vals;
}

std::vector<double> LogicManager::option_dist(const Facts& z) const {
  std::vector<double> d = head_valuations(z);
  double total = 0.0;
  for (double& x : d) {
    x += kHeadEps;
    total += x;
  }
  for (double& x : d) x /= total;
  return d;
}

int LogicManager::argmax_option(const Facts& z) const {
  std::vector<double> vals = head_valuations(z);
  int best = 0;
  for (size_t o = 1; o < vals.size(); ++o)
    if (vals[o] > vals[best]) best = static_cast<int>(o);
  return best;
}

}  // namespace hyrl::agent
