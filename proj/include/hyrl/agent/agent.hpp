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

#ifndef HYRL_AGENT_AGENT_HPP_
#define HYRL_AGENT_AGENT_HPP_

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyrl/env/env.hpp"
#include "hyrl/grad/nn.hpp"
#include "hyrl/grad/tape.hpp"
#include "hyrl/grad/tensor.hpp"
#include "hyrl/options/worker.hpp"
#include "hyrl/reason/reasoner.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::agent {

// Ground facts with truth values, in the environment's signature order.
using Facts = std::vector<std::pair<std::string, uint8_t>>;

// ε added to head valuations before normalizing them into a distribution,
// so an all-false fact vector yields the uniform distribution.
constexpr double kHeadEps = 1e-6;

// Clip range for turning valuations in [0,1] into finite logits.
constexpr double kValuationClip = 1e-4;

// ---------------------------------------------------------------------------
// Action distributions

struct GaussComponent {
  double weight;
  std::array<double, 2> mean;
  std::array<double, 2> log_std;
};

// Either a categorical over the discrete lattice or a Gaussian mixture on
// [-1,1]^2. Mixtures arise from convex policy blending: a convex combination
// of densities is exactly a mixture.
struct ActionDist {
  env::ActionSpace space = env::ActionSpace::kDiscrete;
  std::vector<double> probs;
  std::vector<GaussComponent> components;
};

struct Sampled {
  int discrete = -1;
  std::array<double, 2> continuous{0.0, 0.0};
  double logprob = 0.0;
};

Sampled sample_and_logprob(const ActionDist& d, util::Rng& rng);
double logprob_of(const ActionDist& d, int action);
double logprob_of(const ActionDist& d, const std::array<double, 2>& action);
// Exact for categoricals; for mixtures the standard weighted sum of
// component entropies (ignores overlap, matches the training surrogate).
double entropy_of(const ActionDist& d);
int argmax_action(const ActionDist& d);  // discrete only, ties break low
std::array<double, 2> greedy_continuous(const ActionDist& d);

// Convex blend beta[0]*l + beta[1]*n. Discrete blends probabilities;
// continuous concatenates scaled mixture components.
ActionDist mix_policies(const ActionDist& l, const ActionDist& n,
                        const std::array<double, 2>& beta);

// ---------------------------------------------------------------------------
// LogicManager: differentiable rule evaluation over option-head atoms.

class LogicManager {
 public:
  LogicManager(std::string rule_text, reason::ReasonerConfig rcfg = {});
  static LogicManager from_file(const std::string& path,
                                reason::ReasonerConfig rcfg = {});

  const std::vector<std::string>& options() const { return options_; }
  const logic::Program& program() const;
  uint64_t rule_digest() const { return digest_; }
  const std::string& rule_text() const { return rule_text_; }

  reason::RuleWeights& weights() { return theta_; }
  const reason::RuleWeights& weights() const { return theta_; }
  // Drops memoized valuations; call after mutating weights().
  void invalidate_cache() const { cache_.clear(); }

  // Valuation of each option head (max over its groundings) under θ.
  std::vector<double> head_valuations(const Facts& z) const;
  // ε-smoothed normalization of head valuations.
  std::vector<double> option_dist(const Facts& z) const;
  // Pretraining selector; ties break toward the lowest option index.
  int argmax_option(const Facts& z) const;

  grad::Tensor v0_from_facts(const Facts& z) const;  // [1, G]
  const reason::Reasoner& reasoner() const { return *reasoner_; }
  // Universe indices of each option's head groundings, aligned with options().
  const std::vector<std::vector<int64_t>>& head_atom_indices() const {
    return head_atoms_;
  }

 private:
  std::string rule_text_;
  uint64_t digest_;
  std::unique_ptr<reason::Reasoner> reasoner_;
  reason::RuleWeights theta_;
  std::vector<std::string> options_;
  std::vector<std::vector<int64_t>> head_atoms_;
  mutable std::map<std::string, std::vector<double>> cache_;
};

// ---------------------------------------------------------------------------
// Gate: two-way expert mixer.

enum class GateMode { kLogic, kNeural };

class Gate {
 public:
  // MLP over x with two logits; the final layer starts at zero so the
  // initial blend is exactly (0.5, 0.5).
  static Gate neural(int64_t obs_dim, const std::vector<int64_t>& hidden,
                     util::Rng& rng);
  // Rule file with heads logic_agent / neural_agent; logits are the
  // logit-transform of the clipped head valuations.
  static Gate logic(std::string rule_text, reason::ReasonerConfig rcfg = {});
  static Gate logic_from_file(const std::string& path,
                              reason::ReasonerConfig rcfg = {});

  GateMode mode() const { return mode_; }
  std::array<double, 2> beta(const grad::Tensor& x, const Facts& z) const;
  // Batched neural-mode forward, [B, obs] -> [B, 2]; throws in logic mode.
  grad::Tensor beta_batch(const grad::Tensor& xs) const;

  grad::Mlp& net();              // ψ, neural mode only
  const grad::Mlp& net() const;
  const LogicManager& rules() const;  // logic mode only
  uint64_t rule_digest() const;       // 0 in neural mode

 private:
  Gate() = default;
  GateMode mode_ = GateMode::kNeural;
  std::optional<grad::Mlp> net_;
  std::unique_ptr<LogicManager> rules_;  // reuses head-valuation machinery
};

// ---------------------------------------------------------------------------
// NeuralPolicy: shared tanh encoder with policy and value heads.

struct NeuralPolicy {
  env::ActionSpace space = env::ActionSpace::kDiscrete;
  int64_t obs_dim = 0;
  grad::Mlp encoder;         // tanh after every layer, including the last
  grad::Linear policy_head;  // -> action logits, or action means (continuous)
  grad::Linear value_head;   // -> 1
  grad::Tensor log_std;      // [2], continuous only; clamped to [-5, 2] on read

  static NeuralPolicy make(int64_t obs_dim, env::ActionSpace space,
                           const std::vector<int64_t>& hidden, util::Rng& rng);
  uint64_t param_digest() const;
};

// Plain batched inference, no tape. head: logits [B,A] or squashed means
// [B,2]; value: [B].
struct PolicyEval {
  grad::Tensor head;
  grad::Tensor value;
};
PolicyEval policy_eval(const NeuralPolicy& p, const grad::Tensor& xs);
ActionDist neural_dist(const NeuralPolicy& p, const grad::Tensor& x);

namespace detail {
// Batched MLP forward without a tape; tanh between layers, and also after
// the last one when tanh_last is set.
grad::Tensor mlp_plain(const grad::Mlp& m, const grad::Tensor& xs,
                       bool tanh_last = false);
grad::Tensor linear_plain(const grad::Linear& l, const grad::Tensor& xs);
void digest_mlp(const grad::Mlp& m, uint64_t& h);
// Distribution from one row of a batched head (logits or squashed means).
ActionDist dist_from_row(const NeuralPolicy& p, const grad::Tensor& head,
                         int64_t row);
}  // namespace detail

// ---------------------------------------------------------------------------
// LogicCritic: MLP over the fixed-order truth vector of the signature.

class LogicCritic {
 public:
  LogicCritic(std::vector<std::string> signature,
              const std::vector<int64_t>& hidden, util::Rng& rng);

  const std::vector<std::string>& signature() const { return signature_; }
  grad::Tensor encode(const Facts& z) const;  // [F], validates the order
  double value(const Facts& z) const;
  grad::Tensor value_batch(const std::vector<Facts>& zs) const;  // [B]
  grad::Mlp& net() { return net_; }
  const grad::Mlp& net() const { return net_; }

 private:
  std::vector<std::string> signature_;
  grad::Mlp net_;
};

// ---------------------------------------------------------------------------
// HybridAgent: the full policy stack.

struct HybridConfig {
  std::string manager_rules_path;
  std::string gate_rules_path;  // empty selects the neural gate
  std::vector<int64_t> policy_hidden = {256, 256};
  std::vector<int64_t> gate_hidden = {64};
  std::vector<int64_t> critic_hidden = {64, 64};
  bool manager_argmax = true;    // stage-1 option selection
  bool theta_trainable = false;  // soft manager weights (ablation)
  reason::ReasonerConfig reason_cfg;
};

class HybridAgent {
 public:
  // proto supplies obs_dim, action space, and the fact signature; workers
  // must cover every option head of the manager rule file.
  HybridAgent(HybridConfig cfg, const env::Env& proto, options::WorkerSet workers,
              uint64_t seed);

  struct Forward {
    ActionDist pi_h, pi_l, pi_n;
    std::array<double, 2> beta{0.5, 0.5};
    double v_h = 0.0, v_l = 0.0, v_n = 0.0;
    int option = -1;  // manager argmax, reported in soft mode too
  };
  Forward forward(const grad::Tensor& x, const Facts& z) const;

  // π_L alone: the option distribution marginalized over worker policies.
  ActionDist logic_policy(const grad::Tensor& x, const Facts& z) const;

  const HybridConfig& config() const { return cfg_; }
  LogicManager& manager() { return *manager_; }
  const LogicManager& manager() const { return *manager_; }
  Gate& gate() { return *gate_; }
  const Gate& gate() const { return *gate_; }
  NeuralPolicy& policy() { return policy_; }
  const NeuralPolicy& policy() const { return policy_; }
  LogicCritic& critic() { return *critic_; }
  const LogicCritic& critic() const { return *critic_; }
  const options::WorkerSet& workers() const { return workers_; }

  // φ (+ log_std), ψ (neural gate), θ_V; θ only when theta_trainable.
  grad::ParamSet trainable_params();
  uint64_t worker_digest() const;  // combined digest across the worker set

 private:
  HybridConfig cfg_;
  std::unique_ptr<LogicManager> manager_;
  std::unique_ptr<Gate> gate_;
  NeuralPolicy policy_;
  std::unique_ptr<LogicCritic> critic_;
  options::WorkerSet workers_;
  std::vector<const options::OptionWorker*> worker_by_option_;
};

// ---------------------------------------------------------------------------
// Checkpoints

// Full hybrid checkpoint {format_version, gate mode, rule-file digests,
// parameter blobs}. Loading re-reads the rule files named in cfg and
// verifies their digests against the stored ones.
void save_agent(const HybridAgent& agent, const std::string& path);
HybridAgent load_agent(const std::string& path, const env::Env& proto,
                       options::WorkerSet workers);

// Neural-only export: the policy that needs no rule files or reasoner.
void save_neural(const NeuralPolicy& p, const std::string& path);
NeuralPolicy load_neural(const std::string& path);

}  // namespace hyrl::agent

#endif  // HYRL_AGENT_AGENT_HPP_
