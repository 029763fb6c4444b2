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
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "hyrl/train/train.hpp"

namespace hyrl::train {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kProbFloor = 1e-12;

using grad::Tape;
using grad::Tensor;

std::shared_ptr<const std::vector<int64_t>> idx_of(std::vector<int64_t> v) {
  return std::make_shared<const std::vector<int64_t>>(std::move(v));
}

Tensor take_rows(const Tensor& xs, const std::vector<int64_t>& rows) {
  const int64_t dim = xs.dim(1);
  Tensor out(std::vector<int64_t>{static_cast<int64_t>(rows.size()), dim});
  for (size_t m = 0; m < rows.size(); ++m)
    std::memcpy(out.data() + static_cast<int64_t>(m) * dim,
                xs.data() + rows[m] * dim,
                static_cast<size_t>(dim) * sizeof(double));
  return out;
}

Tensor obs_row(const RolloutBatch& batch, int64_t row) {
  Tensor x(std::vector<int64_t>{batch.obs_dim});
  std::memcpy(x.data(), batch.xs.data() + row * batch.obs_dim,
              static_cast<size_t>(batch.obs_dim) * sizeof(double));
  return x;
}

template <typename F>
Tensor col_from(const std::vector<int64_t>& rows, F&& get) {
  Tensor out(std::vector<int64_t>{static_cast<int64_t>(rows.size())});
  for (size_t m = 0; m < rows.size(); ++m) out.at(static_cast<int64_t>(m)) = get(rows[m]);
  return out;
}

// Bound layers assembled from pre-registered parameter ids.
struct BoundStack {
  std::vector<grad::BoundLinear> layers;
};

Tape::Id forward_stack(Tape& t, const BoundStack& s, Tape::Id x, bool tanh_last) {
  Tape::Id h = x;
  for (size_t i = 0; i < s.layers.size(); ++i) {
    h = t.affine(h, s.layers[i].w, s.layers[i].b);
    if (tanh_last || i + 1 < s.layers.size()) h = t.tanh(h);
  }
  return h;
}

// Positions of each module's tensors inside trainable_params() order.
struct HybridLayout {
  BoundStack encoder;
  grad::BoundLinear head{-1, -1}, value{-1, -1};
  Tape::Id log_std = -1;
  BoundStack gate;  // empty when the gate is rule-driven
  BoundStack critic;
  Tape::Id theta = -1;
};

HybridLayout split_hybrid(const agent::HybridAgent& a,
                          const std::vector<Tape::Id>& params) {
  HybridLayout out;
  size_t i = 0;
  auto next = [&]() -> Tape::Id {
    if (i >= params.size())
      throw std::logic_error("hybrid loss: parameter list shorter than layout");
    return params[i++];
  };
  for (size_t l = 0; l < a.policy().encoder.layers.size(); ++l) {
    grad::BoundLinear bl;
    bl.w = next();
    bl.b = next();
    out.encoder.layers.push_back(bl);
  }
  out.head.w = next();
  out.head.b = next();
  if (a.policy().space == env::ActionSpace::kContinuous) out.log_std = next();
  out.value.w = next();
  out.value.b = next();
  if (a.gate().mode() == agent::GateMode::kNeural) {
    for (size_t l = 0; l < a.gate().net().layers.size(); ++l) {
      grad::BoundLinear bl;
      bl.w = next();
      bl.b = next();
      out.gate.layers.push_back(bl);
    }
  }
  for (size_t l = 0; l < a.critic().net().layers.size(); ++l) {
    grad::BoundLinear bl;
    bl.w = next();
    bl.b = next();
    out.critic.layers.push_back(bl);
  }
  if (a.config().theta_trainable) out.theta = next();
  if (i != params.size())
    throw std::logic_error("hybrid loss: parameter list longer than layout");
  return out;
}

Tape::Id max2(Tape& t, Tape::Id a, Tape::Id b) {
  return t.mul_scalar(t.minimum(t.mul_scalar(a, -1.0), t.mul_scalar(b, -1.0)),
                      -1.0);
}

// -Sum p log p averaged over rows of a probability matrix node.
Tape::Id row_entropy_mean(Tape& t, Tape::Id probs) {
  Tape::Id plogp = t.mul(probs, t.log(t.max_scalar(probs, kProbFloor)));
  return t.mul_scalar(t.mean_all(t.sum_axis(plogp, 1)), -1.0);
}

// Option mixture weights of every minibatch row on the tape, via soft forward
// chaining under the current rule weights. Returns d as [K, U] plus the
// per-row gathers, where U indexes the distinct symbolic states in the batch.
struct SoftManager {
  std::vector<Tape::Id> d_rows;  // per option: [M] mixture weight
};

SoftManager soft_manager_weights(Tape& t, Tape::Id theta,
                                 const agent::HybridAgent& a,
                                 const RolloutBatch& batch,
                                 const std::vector<int64_t>& rows) {
  const agent::LogicManager& mgr = a.manager();
  const int64_t k_opts = static_cast<int64_t>(mgr.options().size());

  std::map<std::string, int64_t> seen;
  std::vector<int64_t> u_of(rows.size());
  std::vector<const agent::Facts*> distinct;
  for (size_t m = 0; m < rows.size(); ++m) {
    const agent::Facts& z = batch.zs[static_cast<size_t>(rows[m])];
    std::string key;
    key.reserve(z.size());
    for (const auto& [atom, truth] : z) key.push_back(truth ? '1' : '0');
    auto [it, fresh] = seen.emplace(key, static_cast<int64_t>(distinct.size()));
    if (fresh) distinct.push_back(&z);
    u_of[m] = it->second;
  }
  const int64_t u_count = static_cast<int64_t>(distinct.size());
  const int64_t g = mgr.v0_from_facts(*distinct[0]).dim(1);
  Tensor v0(std::vector<int64_t>{u_count, g});
  for (int64_t u = 0; u < u_count; ++u) {
    Tensor row = mgr.v0_from_facts(*distinct[static_cast<size_t>(u)]);
    std::memcpy(v0.data() + u * g, row.data(),
                static_cast<size_t>(g) * sizeof(double));
  }
  Tape::Id heads = mgr.reasoner().forward(t, t.constant(std::move(v0)), theta);

  std::vector<Tape::Id> vals;
  for (int64_t k = 0; k < k_opts; ++k) {
    const auto& atoms = mgr.head_atom_indices()[static_cast<size_t>(k)];
    Tape::Id v = t.reshape(t.gather_cols(heads, idx_of({atoms[0]})), {u_count});
    for (size_t j = 1; j < atoms.size(); ++j) {
      Tape::Id c =
          t.reshape(t.gather_cols(heads, idx_of({atoms[j]})), {u_count});
      v = max2(t, v, c);
    }
    vals.push_back(t.add_scalar(v, agent::kHeadEps));
  }
  Tape::Id stacked = t.stack(vals);                      // [K, U]
  Tape::Id sums = t.sum_axis(stacked, 0);                // [U]
  Tape::Id d = t.scale_cols(stacked, t.recip(sums));     // [K, U]
  Tape::Id flat = t.reshape(d, {k_opts * u_count});

  SoftManager out;
  for (int64_t k = 0; k < k_opts; ++k) {
    std::vector<int64_t> ix(rows.size());
    for (size_t m = 0; m < rows.size(); ++m) ix[m] = k * u_count + u_of[m];
    out.d_rows.push_back(t.gather(flat, idx_of(std::move(ix)),
                                  {static_cast<int64_t>(rows.size())}));
  }
  return out;
}

struct CoreNodes {
  Tape::Id logp_new = -1;
  Tape::Id probs = -1;  // discrete only
  Tape::Id entropy = -1;
  Tape::Id v = -1;
};

// Policy head, log-prob of the taken actions and entropy for the pure neural
// branch; shared by the hybrid mixture and the plain update.
CoreNodes neural_core(Tape& t, const BoundStack& encoder,
                      const grad::BoundLinear& head,
                      const grad::BoundLinear& value, Tape::Id log_std,
                      env::ActionSpace space, Tape::Id xs,
                      const RolloutBatch& batch,
                      const std::vector<int64_t>& rows) {
  const int64_t m_count = static_cast<int64_t>(rows.size());
  Tape::Id h = forward_stack(t, encoder, xs, /*tanh_last=*/true);
  Tape::Id head_out = t.affine(h, head.w, head.b);
  CoreNodes out;
  out.v = t.reshape(t.affine(h, value.w, value.b), {m_count});
  if (space == env::ActionSpace::kDiscrete) {
    const int64_t n_act = t.value(head_out).dim(1);
    out.probs = t.softmax(head_out);
    std::vector<int64_t> ix(rows.size());
    for (size_t m = 0; m < rows.size(); ++m)
      ix[m] = static_cast<int64_t>(m) * n_act +
              batch.actions[static_cast<size_t>(rows[m])];
    Tape::Id pa = t.gather(t.reshape(out.probs, {m_count * n_act}),
                           idx_of(std::move(ix)), {m_count});
    out.logp_new = t.log(t.max_scalar(pa, kProbFloor));
    out.entropy = row_entropy_mean(t, out.probs);
  } else {
    Tape::Id means = t.tanh(head_out);  // [M,2]
    Tape::Id ls = t.clamp(log_std, -5.0, 2.0);
    Tensor acts(std::vector<int64_t>{m_count, 2});
    for (size_t m = 0; m < rows.size(); ++m) {
      const auto& a2 = batch.actions2[static_cast<size_t>(rows[m])];
      acts.at2(static_cast<int64_t>(m), 0) = a2[0];
      acts.at2(static_cast<int64_t>(m), 1) = a2[1];
    }
    Tape::Id diff = t.sub(t.constant(std::move(acts)), means);
    Tape::Id zn = t.scale_cols(diff, t.exp(t.mul_scalar(ls, -1.0)));
    Tape::Id q = t.sum_axis(t.mul(zn, zn), 1);  // [M]
    Tape::Id ones = t.constant(Tensor(std::vector<int64_t>{m_count}, 1.0));
    Tape::Id ls_sum_row = t.mul_node1(ones, t.sum_all(ls));
    out.logp_new = t.add_scalar(
        t.sub(t.mul_scalar(q, -0.5), ls_sum_row), -kLog2Pi);
    // Exact per-component entropy; the mixture upstream weights it.
    Tape::Id e_n = t.add_scalar(t.sum_all(ls), 1.0 + kLog2Pi);
    out.entropy = t.mean_all(t.mul_node1(ones, e_n));
  }
  return out;
}

struct Objective {
  Tape::Id surrogate = -1;
  Tape::Id ratio = -1;
};

Objective clipped_surrogate(Tape& t, Tape::Id logp_new,
                            const RolloutBatch& batch,
                            const std::vector<int64_t>& rows,
                            const TrainConfig& cfg) {
  Tape::Id old_logp = t.constant(
      col_from(rows, [&](int64_t r) { return batch.logp[static_cast<size_t>(r)]; }));
  Tape::Id adv = t.constant(col_from(
      rows, [&](int64_t r) { return batch.advantages[static_cast<size_t>(r)]; }));
  Objective out;
  out.ratio = t.exp(t.sub(logp_new, old_logp));
  Tape::Id s1 = t.mul(out.ratio, adv);
  Tape::Id s2 = t.mul(t.clamp(out.ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv);
  out.surrogate = t.mean_all(t.minimum(s1, s2));
  return out;
}

Tape::Id value_objective(Tape& t, Tape::Id v, const RolloutBatch& batch,
                         const std::vector<int64_t>& rows) {
  Tape::Id ret = t.constant(col_from(
      rows, [&](int64_t r) { return batch.returns[static_cast<size_t>(r)]; }));
  Tape::Id err = t.sub(v, ret);
  return t.mean_all(t.mul(err, err));
}

Tape::Id total_loss(Tape& t, Tape::Id surrogate, Tape::Id value_loss,
                    Tape::Id entropy, Tape::Id gate_entropy,
                    const TrainConfig& cfg) {
  Tape::Id loss = t.add(t.mul_scalar(surrogate, -1.0),
                        t.mul_scalar(value_loss, cfg.value_coef));
  loss = t.add(loss, t.mul_scalar(entropy, -cfg.entropy_coef));
  if (gate_entropy >= 0)
    loss = t.add(loss, t.mul_scalar(gate_entropy, -cfg.gate_entropy_coef));
  return loss;
}

}  // namespace

LossNodes build_neural_loss(Tape& tape, const std::vector<Tape::Id>& params,
                            const agent::NeuralPolicy& policy,
                            const RolloutBatch& batch,
                            const std::vector<int64_t>& rows,
                            const TrainConfig& cfg) {
  if (rows.empty()) throw std::invalid_argument("loss: empty minibatch");
  BoundStack encoder;
  size_t i = 0;
  auto next = [&]() -> Tape::Id {
    if (i >= params.size())
      throw std::logic_error("neural loss: parameter list shorter than layout");
    return params[i++];
  };
  for (size_t l = 0; l < policy.encoder.layers.size(); ++l) {
    grad::BoundLinear bl;
    bl.w = next();
    bl.b = next();
    encoder.layers.push_back(bl);
  }
  grad::BoundLinear head{next(), next()};
  Tape::Id log_std = -1;
  if (policy.space == env::ActionSpace::kContinuous) log_std = next();
  grad::BoundLinear value{next(), next()};
  if (i != params.size())
    throw std::logic_error("neural loss: parameter list longer than layout");

  Tape::Id xs = tape.constant(take_rows(batch.xs, rows));
  CoreNodes core = neural_core(tape, encoder, head, value, log_std,
                               policy.space, xs, batch, rows);
  Objective obj = clipped_surrogate(tape, core.logp_new, batch, rows, cfg);
  LossNodes out;
  out.value_loss = value_objective(tape, core.v, batch, rows);
  out.policy_entropy = core.entropy;
  out.surrogate = obj.surrogate;
  out.ratio = obj.ratio;
  out.logp_new = core.logp_new;
  out.loss = total_loss(tape, obj.surrogate, out.value_loss, core.entropy, -1, cfg);
  return out;
}

LossNodes build_hybrid_loss(Tape& tape, const std::vector<Tape::Id>& params,
                            const agent::HybridAgent& agent,
                            const RolloutBatch& batch,
                            const std::vector<int64_t>& rows,
                            const TrainConfig& cfg) {
  if (rows.empty()) throw std::invalid_argument("loss: empty minibatch");
  if (!batch.hybrid)
    throw std::invalid_argument("hybrid loss: batch collected without facts");
  HybridLayout ly = split_hybrid(agent, params);
  const int64_t m_count = static_cast<int64_t>(rows.size());
  const env::ActionSpace space = agent.policy().space;

  Tape::Id xs = tape.constant(take_rows(batch.xs, rows));
  CoreNodes core = neural_core(tape, ly.encoder, ly.head, ly.value, ly.log_std,
                               space, xs, batch, rows);

  // Gate mix: through psi when neural, replayed constants when rule-driven.
  Tape::Id beta;
  if (!ly.gate.layers.empty()) {
    beta = tape.softmax(forward_stack(tape, ly.gate, xs, /*tanh_last=*/false));
  } else {
    Tensor b(std::vector<int64_t>{m_count, 2});
    for (size_t m = 0; m < rows.size(); ++m) {
      const double bl = batch.beta_l[static_cast<size_t>(rows[m])];
      b.at2(static_cast<int64_t>(m), 0) = bl;
      b.at2(static_cast<int64_t>(m), 1) = 1.0 - bl;
    }
    beta = tape.constant(std::move(b));
  }
  Tape::Id beta_l = tape.reshape(tape.gather_cols(beta, idx_of({0})), {m_count});
  Tape::Id beta_n = tape.reshape(tape.gather_cols(beta, idx_of({1})), {m_count});
  Tape::Id gate_entropy = row_entropy_mean(tape, beta);

  // Logic branch: per-option worker responses stay frozen constants; the
  // option mix runs through the reasoner only when theta is trainable.
  SoftManager soft;
  if (ly.theta >= 0) {
    if (agent.config().manager_argmax)
      throw std::logic_error(
          "hybrid loss: trainable rule weights require a soft manager");
    soft = soft_manager_weights(tape, ly.theta, agent, batch, rows);
  }

  LossNodes out;
  out.gate_entropy = gate_entropy;
  Tape::Id logp_h = -1;
  Tape::Id entropy = -1;
  if (space == env::ActionSpace::kDiscrete) {
    Tape::Id pi_l = -1;
    if (ly.theta >= 0) {
      const auto& opts = agent.manager().options();
      for (size_t k = 0; k < opts.size(); ++k) {
        const options::OptionWorker& w = *agent.workers().at(opts[k]);
        Tensor pk(std::vector<int64_t>{m_count, env::kNumActions});
        for (size_t m = 0; m < rows.size(); ++m) {
          std::vector<double> probs = w.action_probs(obs_row(batch, rows[m]));
          for (int64_t j = 0; j < env::kNumActions; ++j)
            pk.at2(static_cast<int64_t>(m), j) = probs[static_cast<size_t>(j)];
        }
        Tape::Id term =
            tape.scale_rows(tape.constant(std::move(pk)), soft.d_rows[k]);
        pi_l = (k == 0) ? term : tape.add(pi_l, term);
      }
    } else {
      Tensor pl(std::vector<int64_t>{m_count, env::kNumActions});
      for (size_t m = 0; m < rows.size(); ++m) {
        agent::ActionDist d = agent.logic_policy(
            obs_row(batch, rows[m]), batch.zs[static_cast<size_t>(rows[m])]);
        for (int64_t j = 0; j < env::kNumActions; ++j)
          pl.at2(static_cast<int64_t>(m), j) = d.probs[static_cast<size_t>(j)];
      }
      pi_l = tape.constant(std::move(pl));
    }
    Tape::Id pi_h = tape.add(tape.scale_rows(pi_l, beta_l),
                             tape.scale_rows(core.probs, beta_n));
    std::vector<int64_t> ix(rows.size());
    for (size_t m = 0; m < rows.size(); ++m)
      ix[m] = static_cast<int64_t>(m) * env::kNumActions +
              batch.actions[static_cast<size_t>(rows[m])];
    Tape::Id pa = tape.gather(tape.reshape(pi_h, {m_count * env::kNumActions}),
                              idx_of(std::move(ix)), {m_count});
    logp_h = tape.log(tape.max_scalar(pa, kProbFloor));
    entropy = row_entropy_mean(tape, pi_h);
  } else {
    // Mixture density: logaddexp of the two branch log-likelihoods under the
    // gate weights. Entropy is the weighted per-component sum, matching the
    // plain-path surrogate.
    Tape::Id log_bl = tape.log(tape.max_scalar(beta_l, kProbFloor));
    Tape::Id log_bn = tape.log(tape.max_scalar(beta_n, kProbFloor));
    Tape::Id lp_l = -1;
    Tape::Id e_l = -1;
    if (ly.theta >= 0) {
      const auto& opts = agent.manager().options();
      Tape::Id acc = -1;
      Tape::Id eacc = -1;
      for (size_t k = 0; k < opts.size(); ++k) {
        const options::OptionWorker& w = *agent.workers().at(opts[k]);
        Tensor lpw(std::vector<int64_t>{m_count});
        Tensor ew(std::vector<int64_t>{m_count});
        for (size_t m = 0; m < rows.size(); ++m) {
          std::array<double, 4> gp = w.action_gaussian(obs_row(batch, rows[m]));
          agent::ActionDist d;
          d.space = env::ActionSpace::kContinuous;
          d.components.push_back({1.0, {gp[0], gp[1]}, {gp[2], gp[3]}});
          lpw.at(static_cast<int64_t>(m)) = agent::logprob_of(
              d, batch.actions2[static_cast<size_t>(rows[m])]);
          ew.at(static_cast<int64_t>(m)) = agent::entropy_of(d);
        }
        Tape::Id dk = soft.d_rows[k];
        Tape::Id term = tape.add(tape.log(tape.max_scalar(dk, kProbFloor)),
                                 tape.constant(std::move(lpw)));
        acc = (k == 0) ? term : tape.logaddexp(acc, term, 1.0);
        Tape::Id eterm = tape.mul(dk, tape.constant(std::move(ew)));
        eacc = (k == 0) ? eterm : tape.add(eacc, eterm);
      }
      lp_l = acc;
      e_l = eacc;
    } else {
      Tensor lpl(std::vector<int64_t>{m_count});
      Tensor el(std::vector<int64_t>{m_count});
      for (size_t m = 0; m < rows.size(); ++m) {
        agent::ActionDist d = agent.logic_policy(
            obs_row(batch, rows[m]), batch.zs[static_cast<size_t>(rows[m])]);
        lpl.at(static_cast<int64_t>(m)) =
            agent::logprob_of(d, batch.actions2[static_cast<size_t>(rows[m])]);
        el.at(static_cast<int64_t>(m)) = agent::entropy_of(d);
      }
      lp_l = tape.constant(std::move(lpl));
      e_l = tape.constant(std::move(el));
    }
    logp_h = tape.logaddexp(tape.add(log_bl, lp_l),
                            tape.add(log_bn, core.logp_new), 1.0);
    Tape::Id ones = tape.constant(Tensor(std::vector<int64_t>{m_count}, 1.0));
    Tape::Id e_n_row = tape.mul_node1(ones, core.entropy);
    entropy = tape.mean_all(
        tape.add(tape.mul(beta_l, e_l), tape.mul(beta_n, e_n_row)));
  }

  // Value mix mirrors the behavior-side v_h = beta_l v_L + beta_n v_N.
  Tensor enc(std::vector<int64_t>{
      m_count, static_cast<int64_t>(agent.critic().signature().size())});
  for (size_t m = 0; m < rows.size(); ++m) {
    Tensor row = agent.critic().encode(batch.zs[static_cast<size_t>(rows[m])]);
    std::memcpy(enc.data() + static_cast<int64_t>(m) * row.size(), row.data(),
                static_cast<size_t>(row.size()) * sizeof(double));
  }
  Tape::Id v_l = tape.reshape(
      forward_stack(tape, ly.critic, tape.constant(std::move(enc)),
                    /*tanh_last=*/false),
      {m_count});
  Tape::Id v_h =
      tape.add(tape.mul(beta_l, v_l), tape.mul(beta_n, core.v));

  Objective obj = clipped_surrogate(tape, logp_h, batch, rows, cfg);
  out.value_loss = value_objective(tape, v_h, batch, rows);
  out.policy_entropy = entropy;
  out.surrogate = obj.surrogate;
  out.ratio = obj.ratio;
  out.logp_new = logp_h;
  out.loss = total_loss(tape, obj.surrogate, out.value_loss, entropy,
                        gate_entropy, cfg);
  return out;
}

grad::ParamSet neural_params(agent::NeuralPolicy& policy) {
  grad::ParamSet ps;
  ps.add_mlp("policy.encoder", &policy.encoder);
  ps.add("policy.head.w", &policy.policy_head.w);
  ps.add("policy.head.b", &policy.policy_head.b);
  if (policy.space == env::ActionSpace::kContinuous)
    ps.add("policy.log_std", &policy.log_std);
  ps.add("value.w", &policy.value_head.w);
  ps.add("value.b", &policy.value_head.b);
  return ps;
}

namespace {

void whiten_advantages(RolloutBatch& batch) {
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= static_cast<double>(batch.advantages.size());
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(batch.advantages.size());
  const double denom = std::sqrt(var) + 1e-8;
  for (double& a : batch.advantages) a = (a - mean) / denom;
}

using BuildFn = std::function<LossNodes(Tape&, const std::vector<Tape::Id>&,
                                        const std::vector<int64_t>&)>;

PpoStats run_ppo_epochs(grad::ParamSet ps, const BuildFn& build,
                        grad::Adam& opt, RolloutBatch& batch,
                        const TrainConfig& cfg, util::Rng& rng,
                        const std::function<void()>& after_step) {
  cfg.validate();
  if (batch.advantages.empty())
    throw std::invalid_argument("ppo_update: run compute_gae first");
  if (cfg.advantage_norm) whiten_advantages(batch);

  std::vector<int64_t> order(static_cast<size_t>(batch.rows()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

  PpoStats acc;
  int64_t chunks = 0;
  bool first = true;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.randint(static_cast<int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    const int64_t per = (batch.rows() + cfg.minibatches - 1) / cfg.minibatches;
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const int64_t lo = static_cast<int64_t>(mb) * per;
      const int64_t hi = std::min<int64_t>(lo + per, batch.rows());
      if (lo >= hi) continue;
      std::vector<int64_t> rows(order.begin() + lo, order.begin() + hi);

      Tape tape;
      std::vector<Tape::Id> params;
      params.reserve(ps.size());
      for (const auto& ref : ps.refs()) params.push_back(tape.input(*ref.tensor));

      LossNodes nodes;
      try {
        nodes = build(tape, params, rows);
      } catch (const grad::TapeError& e) {
        throw std::runtime_error(
            std::string("ppo_update: non-finite loss graph (epoch ") +
            std::to_string(epoch) + ", minibatch " + std::to_string(mb) +
            "): " + e.what());
      }
      const double loss_v = tape.scalar(nodes.loss);
      if (!std::isfinite(loss_v)) {
        throw std::runtime_error(
            "ppo_update: non-finite loss at epoch " + std::to_string(epoch) +
            ", minibatch " + std::to_string(mb) +
            " (surrogate=" + std::to_string(tape.scalar(nodes.surrogate)) +
            ", value_loss=" + std::to_string(tape.scalar(nodes.value_loss)) + ")");
      }
      tape.backward(nodes.loss);
      std::vector<Tensor> grads;
      grads.reserve(ps.size());
      for (size_t k = 0; k < ps.size(); ++k) {
        const Tape::Id id = params[k];
        grads.push_back(tape.has_grad(id)
                            ? tape.grad(id)
                            : Tensor(ps.refs()[k].tensor->shape(), 0.0));
      }

      acc.loss += loss_v;
      acc.policy_loss += -tape.scalar(nodes.surrogate);
      acc.value_loss += tape.scalar(nodes.value_loss);
      acc.policy_entropy += tape.scalar(nodes.policy_entropy);
      if (nodes.gate_entropy >= 0)
        acc.gate_entropy += tape.scalar(nodes.gate_entropy);
      const Tensor& ratio = tape.value(nodes.ratio);
      const Tensor& lpnew = tape.value(nodes.logp_new);
      int64_t clipped = 0;
      double kl = 0.0;
      for (int64_t m = 0; m < ratio.size(); ++m) {
        if (std::abs(ratio.at(m) - 1.0) > cfg.clip_eps) ++clipped;
        kl += batch.logp[static_cast<size_t>(rows[static_cast<size_t>(m)])] -
              lpnew.at(m);
      }
      acc.clip_fraction +=
          static_cast<double>(clipped) / static_cast<double>(ratio.size());
      acc.approx_kl += kl / static_cast<double>(ratio.size());
      if (first) {
        acc.surrogate = tape.scalar(nodes.surrogate);
        first = false;
      }

      acc.grad_norm += opt.step(ps, grads, cfg.max_grad_norm);
      if (after_step) after_step();
      ++chunks;
    }
  }
  if (chunks > 0) {
    const double inv = 1.0 / static_cast<double>(chunks);
    acc.loss *= inv;
    acc.policy_loss *= inv;
    acc.value_loss *= inv;
    acc.policy_entropy *= inv;
    acc.gate_entropy *= inv;
    acc.clip_fraction *= inv;
    acc.approx_kl *= inv;
    acc.grad_norm *= inv;
  }
  return acc;
}

}  // namespace

PpoStats ppo_update(agent::HybridAgent& agent, grad::Adam& opt,
                    RolloutBatch& batch, const TrainConfig& cfg,
                    util::Rng& rng) {
  grad::ParamSet ps = agent.trainable_params();
  std::function<void()> after;
  if (agent.config().theta_trainable)
    after = [&agent] { agent.manager().invalidate_cache(); };
  return run_ppo_epochs(
      std::move(ps),
      [&](Tape& t, const std::vector<Tape::Id>& params,
          const std::vector<int64_t>& rows) {
        return build_hybrid_loss(t, params, agent, batch, rows, cfg);
      },
      opt, batch, cfg, rng, after);
}

PpoStats ppo_update(agent::NeuralPolicy& policy, grad::Adam& opt,
                    RolloutBatch& batch, const TrainConfig& cfg,
                    util::Rng& rng) {
  return run_ppo_epochs(
      neural_params(policy),
      [&](Tape& t, const std::vector<Tape::Id>& params,
          const std::vector<int64_t>& rows) {
        return build_neural_loss(t, params, policy, batch, rows, cfg);
      },
      opt, batch, cfg, rng, nullptr);
}

}  // namespace hyrl::train
