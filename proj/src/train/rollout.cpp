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

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "hyrl/train/train.hpp"

namespace hyrl::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("TrainConfig: " + what);
  };
  if (discount <= 0.0 || discount > 1.0) fail("discount must be in (0, 1]");
  if (learning_rate <= 0.0) fail("learning_rate must be positive");
  if (clip_eps <= 0.0 || clip_eps >= 1.0) fail("clip_eps must be in (0, 1)");
  if (entropy_coef < 0.0) fail("entropy_coef must be non-negative");
  if (gate_entropy_coef < 0.0) fail("gate_entropy_coef must be non-negative");
  if (value_coef < 0.0) fail("value_coef must be non-negative");
  if (max_grad_norm < 0.0) fail("max_grad_norm must be non-negative");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) fail("gae_lambda must be in [0, 1]");
  if (num_envs <= 0) fail("num_envs must be positive");
  if (rollout_steps <= 0) fail("rollout_steps must be positive");
  if (total_steps <= 0) fail("total_steps must be positive");
  if (minibatches <= 0) fail("minibatches must be positive");
  if (epochs <= 0) fail("epochs must be positive");
}

double RolloutBatch::mean_beta_l() const {
  if (beta_l.empty()) return 0.0;
  double s = 0.0;
  for (double b : beta_l) s += b;
  return s / static_cast<double>(beta_l.size());
}

void compute_gae(RolloutBatch& batch, const TrainConfig& cfg) {
  const int64_t n = batch.rows();
  if (static_cast<int64_t>(batch.rewards.size()) != n ||
      static_cast<int64_t>(batch.values.size()) != n ||
      static_cast<int64_t>(batch.dones.size()) != n ||
      static_cast<int64_t>(batch.bootstrap.size()) != batch.envs) {
    throw std::invalid_argument("compute_gae: inconsistent batch");
  }
  batch.advantages.assign(static_cast<size_t>(n), 0.0);
  batch.returns.assign(static_cast<size_t>(n), 0.0);
  for (int64_t e = 0; e < batch.envs; ++e) {
    double acc = 0.0;
    for (int64_t t = batch.steps - 1; t >= 0; --t) {
      const int64_t i = batch.row(t, e);
      const double mask = batch.dones[static_cast<size_t>(i)] ? 0.0 : 1.0;
      const double v_next = (t + 1 < batch.steps)
                                ? batch.values[static_cast<size_t>(batch.row(t + 1, e))]
                                : batch.bootstrap[static_cast<size_t>(e)];
      const double delta = batch.rewards[static_cast<size_t>(i)] +
                           cfg.discount * v_next * mask -
                           batch.values[static_cast<size_t>(i)];
      acc = delta + cfg.discount * cfg.gae_lambda * mask * acc;
      batch.advantages[static_cast<size_t>(i)] = acc;
      batch.returns[static_cast<size_t>(i)] =
          acc + batch.values[static_cast<size_t>(i)];
    }
  }
}

RolloutDriver::RolloutDriver(std::vector<std::unique_ptr<env::Env>>* envs,
                             uint64_t seed)
    : envs_(envs), rng_(seed) {
  if (envs_ == nullptr || envs_->empty())
    throw std::invalid_argument("RolloutDriver: empty env vector");
  const int64_t dim = (*envs_)[0]->obs_dim();
  for (const auto& e : *envs_) {
    if (e->obs_dim() != dim)
      throw std::invalid_argument("RolloutDriver: mixed observation sizes");
  }
  cur_x_.resize(envs_->size());
  ep_return_.assign(envs_->size(), 0.0);
  ep_len_.assign(envs_->size(), 0);
}

void RolloutDriver::ensure_started() {
  if (started_) return;
  for (size_t e = 0; e < envs_->size(); ++e)
    cur_x_[e] = (*envs_)[e]->reset(rng_.next_u64()).x;
  started_ = true;
}

void RolloutDriver::record_done(int64_t e,
                                const std::map<std::string, double>& info) {
  Episode ep;
  ep.ret = ep_return_[static_cast<size_t>(e)];
  ep.len = ep_len_[static_cast<size_t>(e)];
  auto it = info.find("floor_reached");
  if (it != info.end()) ep.floor = it->second;
  finished_.push_back(ep);
  ep_return_[static_cast<size_t>(e)] = 0.0;
  ep_len_[static_cast<size_t>(e)] = 0;
}

std::vector<RolloutDriver::Episode> RolloutDriver::drain_episodes() {
  return std::exchange(finished_, {});
}

namespace {

// [E, obs] matrix of the current per-env observations.
grad::Tensor batch_obs(const std::vector<grad::Tensor>& xs) {
  const int64_t e_count = static_cast<int64_t>(xs.size());
  const int64_t dim = xs[0].size();
  grad::Tensor out(std::vector<int64_t>{e_count, dim});
  for (int64_t e = 0; e < e_count; ++e)
    std::memcpy(out.data() + e * dim, xs[static_cast<size_t>(e)].data(),
                static_cast<size_t>(dim) * sizeof(double));
  return out;
}

// Environment faults surface with the slot and step that hit them.
template <typename Fn>
env::StepResult checked_step(Fn&& fn, int64_t e, int64_t t) {
  try {
    return fn();
  } catch (const std::exception& ex) {
    throw std::runtime_error("rollout: env slot " + std::to_string(e) +
                             " failed at step " + std::to_string(t) + ": " +
                             ex.what());
  }
}

void reserve_batch(RolloutBatch& b, int steps,
                   const std::vector<std::unique_ptr<env::Env>>& envs,
                   env::ActionSpace space, bool hybrid) {
  b.steps = steps;
  b.envs = static_cast<int64_t>(envs.size());
  b.obs_dim = envs[0]->obs_dim();
  b.space = space;
  b.hybrid = hybrid;
  const size_t n = static_cast<size_t>(b.rows());
  b.xs = grad::Tensor(std::vector<int64_t>{b.rows(), b.obs_dim});
  if (hybrid) b.zs.resize(n);
  if (space == env::ActionSpace::kDiscrete) {
    b.actions.assign(n, 0);
  } else {
    b.actions2.assign(n, {0.0, 0.0});
  }
  b.logp.assign(n, 0.0);
  b.rewards.assign(n, 0.0);
  b.dones.assign(n, 0);
  b.values.assign(n, 0.0);
  if (hybrid) b.beta_l.assign(n, 0.0);
  b.bootstrap.assign(static_cast<size_t>(b.envs), 0.0);
}

}  // namespace

RolloutBatch RolloutDriver::collect(const agent::HybridAgent& a, int steps) {
  ensure_started();
  auto& envs = *envs_;
  const env::ActionSpace space = a.policy().space;
  RolloutBatch b;
  reserve_batch(b, steps, envs, space, /*hybrid=*/true);
  const int64_t e_count = b.envs;

  std::vector<agent::Facts> zs(static_cast<size_t>(e_count));
  for (int64_t t = 0; t < steps; ++t) {
    grad::Tensor xs = batch_obs(cur_x_);
    agent::PolicyEval pe = agent::policy_eval(a.policy(), xs);
    for (int64_t e = 0; e < e_count; ++e)
      zs[static_cast<size_t>(e)] = envs[static_cast<size_t>(e)]->symbolic_facts();
    grad::Tensor v_l = a.critic().value_batch(zs);
    grad::Tensor betas;  // [E,2] in neural-gate mode
    if (a.gate().mode() == agent::GateMode::kNeural)
      betas = a.gate().beta_batch(xs);

    for (int64_t e = 0; e < e_count; ++e) {
      const int64_t i = b.row(t, e);
      const agent::Facts& z = zs[static_cast<size_t>(e)];
      std::array<double, 2> beta =
          (a.gate().mode() == agent::GateMode::kNeural)
              ? std::array<double, 2>{betas.at2(e, 0), betas.at2(e, 1)}
              : a.gate().beta(cur_x_[static_cast<size_t>(e)], z);
      agent::ActionDist pi_n = agent::detail::dist_from_row(a.policy(), pe.head, e);
      agent::ActionDist pi_l = a.logic_policy(cur_x_[static_cast<size_t>(e)], z);
      agent::ActionDist pi_h = agent::mix_policies(pi_l, pi_n, beta);
      agent::Sampled s = agent::sample_and_logprob(pi_h, rng_);

      std::memcpy(b.xs.data() + i * b.obs_dim,
                  cur_x_[static_cast<size_t>(e)].data(),
                  static_cast<size_t>(b.obs_dim) * sizeof(double));
      b.zs[static_cast<size_t>(i)] = z;
      b.logp[static_cast<size_t>(i)] = s.logprob;
      b.beta_l[static_cast<size_t>(i)] = beta[0];
      b.values[static_cast<size_t>(i)] =
          beta[0] * v_l.at(e) + beta[1] * pe.value.at(e);

      env::StepResult r;
      if (space == env::ActionSpace::kDiscrete) {
        b.actions[static_cast<size_t>(i)] = s.discrete;
        r = checked_step(
            [&] { return envs[static_cast<size_t>(e)]->step(s.discrete); }, e, t);
      } else {
        b.actions2[static_cast<size_t>(i)] = s.continuous;
        r = checked_step(
            [&] {
              return envs[static_cast<size_t>(e)]->step(s.continuous[0],
                                                        s.continuous[1]);
            },
            e, t);
      }
      b.rewards[static_cast<size_t>(i)] = r.reward;
      b.dones[static_cast<size_t>(i)] = r.done ? 1 : 0;
      ep_return_[static_cast<size_t>(e)] += r.reward;
      ep_len_[static_cast<size_t>(e)] += 1;
      if (r.done) {
        record_done(e, r.info);
        cur_x_[static_cast<size_t>(e)] =
            envs[static_cast<size_t>(e)]->reset(rng_.next_u64()).x;
      } else {
        cur_x_[static_cast<size_t>(e)] = r.obs.x;
      }
      ++total_;
    }
  }

  // Bootstrap from the states the rollout stopped in.
  grad::Tensor xs = batch_obs(cur_x_);
  agent::PolicyEval pe = agent::policy_eval(a.policy(), xs);
  for (int64_t e = 0; e < e_count; ++e)
    zs[static_cast<size_t>(e)] = envs[static_cast<size_t>(e)]->symbolic_facts();
  grad::Tensor v_l = a.critic().value_batch(zs);
  grad::Tensor betas;
  if (a.gate().mode() == agent::GateMode::kNeural)
    betas = a.gate().beta_batch(xs);
  for (int64_t e = 0; e < e_count; ++e) {
    std::array<double, 2> beta =
        (a.gate().mode() == agent::GateMode::kNeural)
            ? std::array<double, 2>{betas.at2(e, 0), betas.at2(e, 1)}
            : a.gate().beta(cur_x_[static_cast<size_t>(e)],
                            zs[static_cast<size_t>(e)]);
    b.bootstrap[static_cast<size_t>(e)] =
        beta[0] * v_l.at(e) + beta[1] * pe.value.at(e);
  }
  return b;
}

RolloutBatch RolloutDriver::collect(const agent::NeuralPolicy& p, int steps) {
  ensure_started();
  auto& envs = *envs_;
  RolloutBatch b;
  reserve_batch(b, steps, envs, p.space, /*hybrid=*/false);
  const int64_t e_count = b.envs;

  for (int64_t t = 0; t < steps; ++t) {
    grad::Tensor xs = batch_obs(cur_x_);
    agent::PolicyEval pe = agent::policy_eval(p, xs);
    for (int64_t e = 0; e < e_count; ++e) {
      const int64_t i = b.row(t, e);
      agent::ActionDist pi = agent::detail::dist_from_row(p, pe.head, e);
      agent::Sampled s = agent::sample_and_logprob(pi, rng_);

      std::memcpy(b.xs.data() + i * b.obs_dim,
                  cur_x_[static_cast<size_t>(e)].data(),
                  static_cast<size_t>(b.obs_dim) * sizeof(double));
      b.logp[static_cast<size_t>(i)] = s.logprob;
      b.values[static_cast<size_t>(i)] = pe.value.at(e);

      env::StepResult r;
      if (p.space == env::ActionSpace::kDiscrete) {
        b.actions[static_cast<size_t>(i)] = s.discrete;
        r = checked_step(
            [&] { return envs[static_cast<size_t>(e)]->step(s.discrete); }, e, t);
      } else {
        b.actions2[static_cast<size_t>(i)] = s.continuous;
        r = checked_step(
            [&] {
              return envs[static_cast<size_t>(e)]->step(s.continuous[0],
                                                        s.continuous[1]);
            },
            e, t);
      }
      b.rewards[static_cast<size_t>(i)] = r.reward;
      b.dones[static_cast<size_t>(i)] = r.done ? 1 : 0;
      ep_return_[static_cast<size_t>(e)] += r.reward;
      ep_len_[static_cast<size_t>(e)] += 1;
      if (r.done) {
        record_done(e, r.info);
        cur_x_[static_cast<size_t>(e)] =
            envs[static_cast<size_t>(e)]->reset(rng_.next_u64()).x;
      } else {
        cur_x_[static_cast<size_t>(e)] = r.obs.x;
      }
      ++total_;
    }
  }

  grad::Tensor xs = batch_obs(cur_x_);
  agent::PolicyEval pe = agent::policy_eval(p, xs);
  for (int64_t e = 0; e < e_count; ++e)
    b.bootstrap[static_cast<size_t>(e)] = pe.value.at(e);
  return b;
}

std::vector<std::unique_ptr<env::Env>> make_env_vec(env::EnvConfig cfg, int n,
                                                    uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("make_env_vec: n must be positive");
  std::vector<std::unique_ptr<env::Env>> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    cfg.seed = seed + static_cast<uint64_t>(i);
    out.push_back(env::make_env(cfg));
  }
  return out;
}

}  // namespace hyrl::train
