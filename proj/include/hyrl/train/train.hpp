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

#ifndef HYRL_TRAIN_TRAIN_HPP_
#define HYRL_TRAIN_TRAIN_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hyrl/agent/agent.hpp"
#include "hyrl/env/env.hpp"
#include "hyrl/grad/nn.hpp"
#include "hyrl/grad/tape.hpp"
#include "hyrl/grad/tensor.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::train {

struct TrainConfig {
  double discount = 0.99;
  double learning_rate = 2.5e-4;
  double clip_eps = 0.1;
  double entropy_coef = 0.01;       // policy entropy bonus
  double gate_entropy_coef = 0.01;  // gate entropy bonus (hybrid updates only)
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double gae_lambda = 0.95;
  int num_envs = 16;
  int rollout_steps = 128;
  int64_t total_steps = 2'000'000;
  int minibatches = 4;
  int epochs = 4;
  uint64_t seed = 0;
  bool advantage_norm = true;  // per-update whitening of advantages

  // Throws std::invalid_argument on a non-positive field or clip_eps >= 1.
  void validate() const;
};

// Flat transition store in time-major order: row(t, e) = t * envs + e.
// Hybrid batches carry the symbolic state and gate mix of every row; pure
// neural batches leave zs / beta_l empty and never touch fact extraction.
struct RolloutBatch {
  int64_t steps = 0;
  int64_t envs = 0;
  int64_t obs_dim = 0;
  env::ActionSpace space = env::ActionSpace::kDiscrete;
  bool hybrid = false;

  grad::Tensor xs;  // [steps*envs, obs_dim]
  std::vector<agent::Facts> zs;
  std::vector<int> actions;
  std::vector<std::array<double, 2>> actions2;  // continuous mode
  std::vector<double> logp;                     // behavior log-probs
  std::vector<double> rewards;
  std::vector<uint8_t> dones;
  std::vector<double> values;     // V under the behavior parameters
  std::vector<double> beta_l;     // gate weight on the logic branch
  std::vector<double> bootstrap;  // [envs] V of the state after the last row

  std::vector<double> advantages;  // filled by compute_gae
  std::vector<double> returns;     // advantages + values

  int64_t rows() const { return steps * envs; }
  int64_t row(int64_t t, int64_t e) const { return t * envs + e; }
  double mean_beta_l() const;
};

// delta_t = r_t + discount * V_{t+1} * (1 - done_t) - V_t
// A_t     = delta_t + discount * lambda * (1 - done_t) * A_{t+1}
// R_t     = A_t + V_t
// The value after the final row of each env column comes from
// batch.bootstrap. Raw advantages are written; whitening happens per update.
void compute_gae(RolloutBatch& batch, const TrainConfig& cfg);

// Steps a fixed set of environment instances and owns the cross-batch state:
// current observations, episode accumulators and the sampling stream. One
// driver per training stage; constructing two drivers with the same seed and
// env configs reproduces identical batches.
class RolloutDriver {
 public:
  RolloutDriver(std::vector<std::unique_ptr<env::Env>>* envs, uint64_t seed);

  // Hybrid collection: extracts facts every step and acts with the mixed
  // policy. Neural collection never requests facts or touches the reasoner.
  RolloutBatch collect(const agent::HybridAgent& a, int steps);
  RolloutBatch collect(const agent::NeuralPolicy& p, int steps);

  struct Episode {
    double ret = 0.0;
    int64_t len = 0;
    double floor = -1.0;  // info["floor_reached"] at the final step, if any
  };
  // Episodes completed since the previous drain, in completion order.
  std::vector<Episode> drain_episodes();
  int64_t total_steps() const { return total_; }

 private:
  void ensure_started();
  void record_done(int64_t e, const std::map<std::string, double>& info);

  std::vector<std::unique_ptr<env::Env>>* envs_;
  util::Rng rng_;
  std::vector<grad::Tensor> cur_x_;
  std::vector<double> ep_return_;
  std::vector<int64_t> ep_len_;
  std::vector<Episode> finished_;
  bool started_ = false;
  int64_t total_ = 0;
};

// Per-update means over all minibatch steps.
struct PpoStats {
  double loss = 0.0;
  double policy_loss = 0.0;  // negative clipped surrogate
  double value_loss = 0.0;
  double policy_entropy = 0.0;
  double gate_entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  double surrogate = 0.0;  // clipped surrogate objective of the first minibatch
};

// Loss-graph handles for one minibatch; loss is the scalar seed.
struct LossNodes {
  grad::Tape::Id loss = -1;
  grad::Tape::Id surrogate = -1;
  grad::Tape::Id value_loss = -1;
  grad::Tape::Id policy_entropy = -1;
  grad::Tape::Id gate_entropy = -1;
  grad::Tape::Id ratio = -1;     // [M]
  grad::Tape::Id logp_new = -1;  // [M]
};

// Builds the clipped-surrogate loss for the given rows on the tape. params
// holds one tape id per agent.trainable_params() entry, in that order; the
// same builder therefore serves the optimizer and finite-difference checks.
LossNodes build_hybrid_loss(grad::Tape& tape,
                            const std::vector<grad::Tape::Id>& params,
                            const agent::HybridAgent& agent,
                            const RolloutBatch& batch,
                            const std::vector<int64_t>& rows,
                            const TrainConfig& cfg);

// Pure neural variant: no gate, no logic branch, no symbolic input. params
// pairs with neural_params(policy). The gate entropy node stays -1.
LossNodes build_neural_loss(grad::Tape& tape,
                            const std::vector<grad::Tape::Id>& params,
                            const agent::NeuralPolicy& policy,
                            const RolloutBatch& batch,
                            const std::vector<int64_t>& rows,
                            const TrainConfig& cfg);

// Parameter registry of a bare policy, mirroring the naming scheme of
// agent::HybridAgent::trainable_params().
grad::ParamSet neural_params(agent::NeuralPolicy& policy);

// One clipped-surrogate update over the batch: whitens advantages in place
// (when enabled), then runs epochs x minibatches Adam steps. Throws
// std::runtime_error with diagnostics if the loss goes non-finite.
PpoStats ppo_update(agent::HybridAgent& agent, grad::Adam& opt,
                    RolloutBatch& batch, const TrainConfig& cfg,
                    util::Rng& rng);
PpoStats ppo_update(agent::NeuralPolicy& policy, grad::Adam& opt,
                    RolloutBatch& batch, const TrainConfig& cfg,
                    util::Rng& rng);

// One metric-log row per update. Columns, in order:
//   step              environment steps consumed so far
//   return_mean/std   episodic return over episodes finished this update
//   episodes          count behind the two return columns
//   floor1..floor4    fraction of those episodes that visited >= k floors
//   beta_l_mean       mean logic-branch gate weight of the update's rollout
//   policy_entropy, gate_entropy, policy_loss, value_loss,
//   clip_fraction, approx_kl, grad_norm, loss
// The header line and column set are fixed; environments without a floor
// notion report zero for the floor columns.
struct MetricRow {
  int64_t step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  int64_t episodes = 0;
  std::array<double, 4> floors{0.0, 0.0, 0.0, 0.0};
  double beta_l_mean = 0.0;
  PpoStats stats;
};

extern const char* const kMetricsHeader;
std::string metrics_to_csv(const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

struct StageResult {
  std::string agent_checkpoint;   // hybrid stage only
  std::string neural_checkpoint;  // policy usable without rules or facts
  std::string metrics_csv;
  std::vector<MetricRow> metrics;
  double mean_beta_l = 0.0;  // final-update rollout mean (hybrid stage)
  int64_t env_steps = 0;
};

// Hybrid pretraining: the manager picks options, workers stay frozen, and the
// gate, policy, symbolic critic and value head train jointly against the
// mixed policy's surrogate. Writes <out_dir>/h2rl.ckpt (full agent),
// <out_dir>/h2rl_pre.ckpt (neural policy only) and
// <out_dir>/pretrain_metrics.csv. Worker parameters are digest-checked before
// and after; a mismatch throws.
StageResult pretrain_stage(agent::HybridAgent& agent,
                           std::vector<std::unique_ptr<env::Env>>& envs,
                           const TrainConfig& cfg, const std::string& out_dir);

// Plain clipped-surrogate training of a bare policy; continues from whatever
// parameters the policy holds. This is the one code path behind both the
// posttraining stage and the from-scratch baseline. The whole stage is
// instrumented: any fact extraction or reasoner call during it throws.
// Writes <out_dir>/<tag>.ckpt and <out_dir>/<tag>_metrics.csv.
StageResult train_neural_stage(agent::NeuralPolicy& policy,
                               std::vector<std::unique_ptr<env::Env>>& envs,
                               const TrainConfig& cfg,
                               const std::string& out_dir,
                               const std::string& tag);

// Loads a neural checkpoint and resumes it with train_neural_stage under the
// tag "h2rl_pre_plus".
StageResult posttrain_stage(const std::string& neural_ckpt,
                            std::vector<std::unique_ptr<env::Env>>& envs,
                            const TrainConfig& cfg, const std::string& out_dir);

// n environment instances of the given config; instance i reseeds with
// seed + i so the slots decorrelate. reset() is left to the caller's driver.
std::vector<std::unique_ptr<env::Env>> make_env_vec(env::EnvConfig cfg, int n,
                                                    uint64_t seed);

}  // namespace hyrl::train

#endif  // HYRL_TRAIN_TRAIN_HPP_
