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

#ifndef HYRL_TRAIN_REPLAY_HPP_
#define HYRL_TRAIN_REPLAY_HPP_

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "hyrl/agent/agent.hpp"
#include "hyrl/env/env.hpp"
#include "hyrl/grad/nn.hpp"
#include "hyrl/options/worker.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::train {

// Observations are 0/1 one-hot stacks, so a transition stores only the
// indices of the set entries. z_truth holds one bit per signature atom.
struct Transition {
  std::vector<uint32_t> x_on, xnext_on;
  std::vector<uint8_t> z_truth;
  int action = 0;
  double reward = 0.0;
  uint8_t done = 0;
};

grad::Tensor dense_obs(const std::vector<uint32_t>& on, int64_t obs_dim);
std::vector<uint32_t> sparse_obs(const grad::Tensor& x);

// FIFO transition store, oldest first. push evicts the front once full, so
// size() never exceeds capacity(). save/load round-trip byte-exactly.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int64_t obs_dim);

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  int64_t obs_dim() const { return obs_dim_; }
  const Transition& at(size_t i) const { return data_.at(i); }

  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path);

 private:
  size_t capacity_;
  int64_t obs_dim_;
  std::deque<Transition> data_;
};

// Fills the buffer with n transitions collected by the argmax manager
// dispatching frozen workers, with epsilon-uniform exploration mixed in so
// the store covers off-policy actions. Next states are recorded before any
// episode reset. Throws std::invalid_argument when n exceeds the buffer
// capacity. Returns the episode count.
int64_t collect_replay_offpolicy(const agent::LogicManager& manager,
                                 const options::WorkerSet& workers,
                                 std::vector<std::unique_ptr<env::Env>>& envs,
                                 ReplayBuffer& buffer, int64_t n,
                                 double epsilon, uint64_t seed);

// Same store filled by a uniform-random behavior policy; the from-scratch
// control for replay-quality comparisons.
int64_t collect_replay_random(std::vector<std::unique_ptr<env::Env>>& envs,
                              ReplayBuffer& buffer, int64_t n, uint64_t seed);

struct DqnConfig {
  double discount = 0.99;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int64_t updates = 20'000;
  int target_sync = 500;  // updates between exact target copies
  double huber_delta = 1.0;
  std::vector<int64_t> hidden{64, 64};
  uint64_t seed = 0;
};

// Online net, frozen target and the update counter driving the sync cadence.
struct DqnState {
  grad::Mlp q;
  grad::Mlp target;
  int64_t updates = 0;
};

DqnState make_dqn(int64_t obs_dim, int num_actions, const DqnConfig& cfg);

// One minibatch of one-step targets y = r + discount * (1-done) *
// max_a' Q_target(x', a'), Huber-penalized against Q(x, a). The target net
// is replaced by an exact copy of the online net every cfg.target_sync
// updates. Returns the minibatch loss.
double dqn_update(DqnState& state, grad::Adam& opt, const ReplayBuffer& buffer,
                  const DqnConfig& cfg, util::Rng& rng);

struct DqnResult {
  int64_t updates = 0;
  double final_loss = 0.0;
};

// cfg.updates minibatch steps over a fixed buffer.
DqnResult offpolicy_pretrain(DqnState& state, const ReplayBuffer& buffer,
                             const DqnConfig& cfg);

// Optional online refinement: epsilon-greedy steps appended to the buffer,
// one dqn_update per environment step.
DqnResult dqn_finetune_online(DqnState& state, env::Env& env,
                              ReplayBuffer& buffer, const DqnConfig& cfg,
                              int64_t steps, double epsilon);

int greedy_q_action(const grad::Mlp& q, const grad::Tensor& x);

void save_q_net(const grad::Mlp& q, int64_t obs_dim, const std::string& path);
grad::Mlp load_q_net(const std::string& path, int64_t* obs_dim = nullptr);

}  // namespace hyrl::train

#endif  // HYRL_TRAIN_REPLAY_HPP_
