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

#ifndef HYRL_OPTIONS_PRETRAIN_HPP_
#define HYRL_OPTIONS_PRETRAIN_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hyrl/env/env.hpp"
#include "hyrl/options/worker.hpp"

namespace hyrl::options {

// Recipe for training one worker: the environment variant it practices in
// (modifications double as the reward shaping, e.g. platform_checkpoints
// pays +20 per new floor) and the interaction budget.
struct OptionSpec {
  std::string option_id;
  std::string env_id;
  env::ActionSpace action_space = env::ActionSpace::kDiscrete;
  std::vector<std::string> modifications;
  int64_t budget_steps = 200'000;
  std::vector<int64_t> hidden{64, 64};
};

// The documented per-option recipe; throws std::invalid_argument for an
// option the environment's rules never name.
OptionSpec default_option_spec(const std::string& option_id,
                               const std::string& env_id,
                               env::ActionSpace space);

// Pass/fail verdict of the option's competence gate: `metric` measured over
// `episodes` greedy evaluation episodes against the documented threshold.
struct GateReport {
  bool passed = false;
  double metric = 0.0;
  double threshold = 0.0;
  int episodes = 0;
};

// Greedy evaluation of a worker on its option's gate environment. The gate
// is specific to the option: e.g. ascent options must clear the tower with
// enemies disabled in >= 90% of episodes, jump options must clear at least
// one barrel per episode on average.
GateReport run_competence_gate(const OptionWorker& worker,
                               const std::string& env_id, uint64_t seed);

struct PretrainResult {
  std::shared_ptr<const OptionWorker> worker;
  GateReport gate;
  int64_t env_steps = 0;
};

// Trains a fresh policy on the spec's shaped environment and wraps it as a
// worker. The returned gate report is the contract: a budget too small to
// reach competence comes back with gate.passed == false and is the caller's
// error to surface, never to ignore.
PretrainResult pretrain_option(const OptionSpec& spec, uint64_t seed);

}  // namespace hyrl::options

#endif  // HYRL_OPTIONS_PRETRAIN_HPP_
