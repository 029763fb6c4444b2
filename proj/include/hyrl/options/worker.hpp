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

#ifndef HYRL_OPTIONS_WORKER_HPP_
#define HYRL_OPTIONS_WORKER_HPP_

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hyrl/env/env.hpp"
#include "hyrl/grad/nn.hpp"
#include "hyrl/grad/tensor.hpp"
#include "hyrl/logic/program.hpp"

namespace hyrl::options {

// Std-dev of the Gaussian wrapped around a discrete controller's action
// when it is driven through the continuous interface.
constexpr double kContinuousLogStd = -3.0;

// A low-level subtask policy. Workers are immutable once constructed:
// action_probs never mutates state and exposes no parameter handles, so
// nothing upstream can push gradients into a worker.
class OptionWorker {
 public:
  OptionWorker(std::string option_id, env::ActionSpace space)
      : option_id_(std::move(option_id)), space_(space) {}
  virtual ~OptionWorker() = default;

  const std::string& option_id() const { return option_id_; }
  env::ActionSpace action_space() const { return space_; }
  virtual std::string kind() const = 0;

  // Probability vector over the discrete action lattice; sums to 1.
  virtual std::vector<double> action_probs(const grad::Tensor& x) const = 0;

  // (mean_x, mean_y, log_std_x, log_std_y): the discrete controller's argmax
  // action pushed through the inverse threshold map, with a tight std-dev.
  std::array<double, 4> action_gaussian(const grad::Tensor& x) const;

  // Digest over the parameter blob; byte-stable, used by the frozen-worker
  // property test and checkpoint headers.
  virtual uint64_t param_digest() const = 0;

 private:
  std::string option_id_;
  env::ActionSpace space_;
};

// Deterministic hand-written controller for option_id. Throws
// std::invalid_argument for ids without a scripted rule.
std::unique_ptr<OptionWorker> make_scripted_worker(const std::string& option_id,
                                                   env::ActionSpace space);

// MLP policy head frozen into plain buffers; inference runs off-tape.
class NeuralWorker final : public OptionWorker {
 public:
  NeuralWorker(std::string option_id, env::ActionSpace space, grad::Mlp net,
               uint64_t training_digest);

  std::string kind() const override { return "neural"; }
  std::vector<double> action_probs(const grad::Tensor& x) const override;
  uint64_t param_digest() const override;
  uint64_t training_digest() const { return training_digest_; }
  const grad::Mlp& net() const { return net_; }

 private:
  grad::Mlp net_;
  uint64_t training_digest_;
};

// Versioned binary checkpoints: header {magic, format_version, kind,
// action_space, option_id, training digest}, the parameter blob, and a
// trailing content digest.
void save_worker(const OptionWorker& w, const std::string& path);
std::unique_ptr<OptionWorker> load_worker(const std::string& path);

// Registry file: JSON object mapping option_id -> checkpoint path
// (relative paths resolve against the registry's own directory).
using WorkerSet = std::map<std::string, std::shared_ptr<const OptionWorker>>;
void save_registry(const std::map<std::string, std::string>& entries,
                   const std::string& path);
WorkerSet load_worker_set(const std::string& registry_path);

// Distinct head predicate names of a rule program, in first-use order.
std::vector<std::string> rule_head_options(const logic::Program& p);

// Startup validation: every rule-head option id has a registered worker.
void validate_worker_coverage(const std::vector<std::string>& heads,
                              const WorkerSet& workers);

// A scripted worker for every option an environment's rule file names.
WorkerSet scripted_worker_set(const std::string& env_id, env::ActionSpace space);

}  // namespace hyrl::options

#endif  // HYRL_OPTIONS_WORKER_HPP_
