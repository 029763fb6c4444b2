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

#include "hyrl/train/replay.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "hyrl/grad/tape.hpp"
#include "hyrl/util/binio.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::train {

namespace {

using util::put_f64;
using util::put_u32;
using util::put_u64;
using util::put_u8;

constexpr char kReplayMagic[] = "HYRLRPB1";
constexpr char kQNetMagic[] = "HYRLQNE1";
constexpr uint32_t kFormatVersion = 1;

void put_indices(std::string& s, const std::vector<uint32_t>& on) {
  put_u32(s, static_cast<uint32_t>(on.size()));
  for (uint32_t i : on) put_u32(s, i);
}

std::vector<uint32_t> read_indices(util::BinReader& r, int64_t obs_dim) {
  uint32_t n = r.u32();
  if (static_cast<int64_t>(n) > obs_dim)
    throw std::runtime_error("corrupt replay: index count");
  std::vector<uint32_t> on(n);
  for (uint32_t i = 0; i < n; ++i) {
    on[i] = r.u32();
    if (static_cast<int64_t>(on[i]) >= obs_dim)
      throw std::runtime_error("corrupt replay: index out of range");
  }
  return on;
}

void put_tensor(std::string& s, const grad::Tensor& t) {
  put_u32(s, static_cast<uint32_t>(t.rank()));
  for (size_t i = 0; i < t.rank(); ++i)
    put_u64(s, static_cast<uint64_t>(t.dim(i)));
  for (int64_t i = 0; i < t.size(); ++i) put_f64(s, t.at(i));
}

grad::Tensor read_tensor(util::BinReader& r) {
  uint32_t rank = r.u32();
  if (rank > 4) throw std::runtime_error("corrupt q-net: tensor rank");
  std::vector<int64_t> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(r.u64());
  grad::Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t.at(i) = r.f64();
  return t;
}

void seal_and_write(std::string blob, const std::string& path) {
  put_u64(blob, util::fnv1a(blob));
  util::write_file(path, blob);
}

util::BinReader open_blob(const std::string& blob, const char* magic,
                          const std::string& path) {
  if (blob.size() < 16 || blob.compare(0, 8, magic) != 0)
    throw std::runtime_error("not a " + std::string(magic) + " file: " + path);
  util::BinReader tail(blob, blob.size() - 8);
  uint64_t stored = tail.u64();
  if (util::fnv1a(blob.data(), blob.size() - 8) != stored)
    throw std::runtime_error("replay digest mismatch: " + path);
  return util::BinReader(blob, 8);
}

// Batched Q forward without a tape: tanh between layers, linear last.
grad::Tensor q_plain(const grad::Mlp& m, const grad::Tensor& xs) {
  return agent::detail::mlp_plain(m, xs, /*tanh_last=*/false);
}

int row_argmax(const grad::Tensor& m, int64_t row) {
  const int64_t cols = m.dim(1);
  int best = 0;
  for (int64_t j = 1; j < cols; ++j)
    if (m.at2(row, j) > m.at2(row, best)) best = static_cast<int>(j);
  return best;
}

}  // namespace

grad::Tensor dense_obs(const std::vector<uint32_t>& on, int64_t obs_dim) {
  grad::Tensor x(std::vector<int64_t>{1, obs_dim});
  for (uint32_t i : on) {
    if (static_cast<int64_t>(i) >= obs_dim)
      throw std::invalid_argument("dense_obs: index out of range");
    x.at(static_cast<int64_t>(i)) = 1.0;
  }
  return x;
}

std::vector<uint32_t> sparse_obs(const grad::Tensor& x) {
  std::vector<uint32_t> on;
  for (int64_t i = 0; i < x.size(); ++i)
    if (x.at(i) != 0.0) on.push_back(static_cast<uint32_t>(i));
  return on;
}

ReplayBuffer::ReplayBuffer(size_t capacity, int64_t obs_dim)
    : capacity_(capacity), obs_dim_(obs_dim) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  if (obs_dim <= 0) throw std::invalid_argument("ReplayBuffer: bad obs_dim");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(t));
}

void ReplayBuffer::save(const std::string& path) const {
  std::string s(kReplayMagic, 8);
  put_u32(s, kFormatVersion);
  put_u64(s, static_cast<uint64_t>(capacity_));
  put_u64(s, static_cast<uint64_t>(obs_dim_));
  put_u64(s, static_cast<uint64_t>(data_.size()));
  for (const Transition& t : data_) {
    put_indices(s, t.x_on);
    put_indices(s, t.xnext_on);
    put_u32(s, static_cast<uint32_t>(t.z_truth.size()));
    for (uint8_t b : t.z_truth) put_u8(s, b);
    put_u32(s, static_cast<uint32_t>(t.action));
    put_f64(s, t.reward);
    put_u8(s, t.done);
  }
  seal_and_write(std::move(s), path);
}

ReplayBuffer ReplayBuffer::load(const std::string& path) {
  std::string blob = util::read_file(path);
  util::BinReader r = open_blob(blob, kReplayMagic, path);
  uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported replay version " +
                             std::to_string(version) + ": " + path);
  size_t capacity = static_cast<size_t>(r.u64());
  int64_t obs_dim = static_cast<int64_t>(r.u64());
  uint64_t n = r.u64();
  ReplayBuffer buf(capacity, obs_dim);
  if (n > capacity) throw std::runtime_error("corrupt replay: overfull");
  for (uint64_t k = 0; k < n; ++k) {
    Transition t;
    t.x_on = read_indices(r, obs_dim);
    t.xnext_on = read_indices(r, obs_dim);
    uint32_t zn = r.u32();
    if (zn > 4096) throw std::runtime_error("corrupt replay: fact count");
    t.z_truth.resize(zn);
    for (uint32_t i = 0; i < zn; ++i) t.z_truth[i] = r.u8();
    t.action = static_cast<int>(r.u32());
    t.reward = r.f64();
    t.done = r.u8();
    buf.push(std::move(t));
  }
  return buf;
}

namespace {

// Shared collection loop; act() maps the current ObsPair to an action.
template <typename ActFn>
int64_t collect_loop(std::vector<std::unique_ptr<env::Env>>& envs,
                     ReplayBuffer& buffer, int64_t n, uint64_t seed,
                     bool record_facts, ActFn act) {
  if (envs.empty()) throw std::invalid_argument("collect_replay: no envs");
  if (n <= 0) throw std::invalid_argument("collect_replay: non-positive n");
  if (static_cast<size_t>(n) > buffer.capacity())
    throw std::invalid_argument(
        "collect_replay: n exceeds buffer capacity " +
        std::to_string(buffer.capacity()));
  for (const auto& e : envs)
    if (e->obs_dim() != buffer.obs_dim())
      throw std::invalid_argument("collect_replay: obs_dim mismatch");

  util::Rng rng(seed);
  std::vector<grad::Tensor> cur(envs.size());
  for (size_t e = 0; e < envs.size(); ++e)
    cur[e] = envs[e]->reset(rng.next_u64()).x;

  int64_t episodes = 0;
  int64_t collected = 0;
  while (collected < n) {
    const size_t e = static_cast<size_t>(collected % static_cast<int64_t>(envs.size()));
    env::Env& env = *envs[e];

    Transition t;
    t.x_on = sparse_obs(cur[e]);
    if (record_facts) {
      const auto& z = env.symbolic_facts();
      t.z_truth.resize(z.size());
      for (size_t i = 0; i < z.size(); ++i) t.z_truth[i] = z[i].second;
    }
    t.action = act(env, cur[e], rng);

    env::StepResult r = env.step(t.action);
    t.xnext_on = sparse_obs(r.obs.x);
    t.reward = r.reward;
    t.done = r.done ? 1 : 0;
    buffer.push(std::move(t));
    ++collected;

    if (r.done) {
      ++episodes;
      cur[e] = env.reset(rng.next_u64()).x;
    } else {
      cur[e] = std::move(r.obs.x);
    }
  }
  return episodes;
}

}  // namespace

int64_t collect_replay_offpolicy(const agent::LogicManager& manager,
                                 const options::WorkerSet& workers,
                                 std::vector<std::unique_ptr<env::Env>>& envs,
                                 ReplayBuffer& buffer, int64_t n,
                                 double epsilon, uint64_t seed) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("collect_replay: epsilon outside [0,1]");
  options::validate_worker_coverage(manager.options(), workers);

  std::vector<const options::OptionWorker*> by_option;
  by_option.reserve(manager.options().size());
  for (const std::string& name : manager.options())
    by_option.push_back(workers.at(name).get());

  return collect_loop(
      envs, buffer, n, seed, /*record_facts=*/true,
      [&](env::Env& env, const grad::Tensor& x, util::Rng& rng) {
        if (epsilon > 0.0 && rng.uniform() < epsilon)
          return static_cast<int>(rng.randint(env.num_actions()));
        const int option = manager.argmax_option(env.symbolic_facts());
        std::vector<double> probs =
            by_option[static_cast<size_t>(option)]->action_probs(x);
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                probs.begin());
      });
}

int64_t collect_replay_random(std::vector<std::unique_ptr<env::Env>>& envs,
                              ReplayBuffer& buffer, int64_t n, uint64_t seed) {
  return collect_loop(envs, buffer, n, seed, /*record_facts=*/false,
                      [](env::Env& env, const grad::Tensor&, util::Rng& rng) {
                        return static_cast<int>(rng.randint(env.num_actions()));
                      });
}

DqnState make_dqn(int64_t obs_dim, int num_actions, const DqnConfig& cfg) {
  if (obs_dim <= 0 || num_actions <= 0)
    throw std::invalid_argument("make_dqn: bad dimensions");
  util::Rng rng(cfg.seed);
  DqnState s;
  s.q = grad::Mlp::make(obs_dim, cfg.hidden, num_actions, rng, /*out_gain=*/0.01);
  s.target = s.q;
  return s;
}

double dqn_update(DqnState& state, grad::Adam& opt, const ReplayBuffer& buffer,
                  const DqnConfig& cfg, util::Rng& rng) {
  if (buffer.size() == 0)
    throw std::invalid_argument("dqn_update: empty replay buffer");
  const int64_t m =
      std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(buffer.size()));
  const int64_t obs = buffer.obs_dim();
  const int num_actions =
      static_cast<int>(state.q.layers.back().b.dim(0));

  grad::Tensor xs(std::vector<int64_t>{m, obs});
  grad::Tensor xn(std::vector<int64_t>{m, obs});
  std::vector<int64_t> picked(static_cast<size_t>(m));
  std::vector<double> rewards(static_cast<size_t>(m));
  std::vector<double> not_done(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    const Transition& t =
        buffer.at(static_cast<size_t>(rng.randint(static_cast<int64_t>(buffer.size()))));
    for (uint32_t k : t.x_on) xs.at2(i, static_cast<int64_t>(k)) = 1.0;
    for (uint32_t k : t.xnext_on) xn.at2(i, static_cast<int64_t>(k)) = 1.0;
    if (t.action < 0 || t.action >= num_actions)
      throw std::invalid_argument("dqn_update: action outside Q head");
    picked[static_cast<size_t>(i)] = i * num_actions + t.action;
    rewards[static_cast<size_t>(i)] = t.reward;
    not_done[static_cast<size_t>(i)] = t.done ? 0.0 : 1.0;
  }

  // One-step targets from the frozen net; no gradient flows through them.
  grad::Tensor qn = q_plain(state.target, xn);
  std::vector<double> ys(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    double best = qn.at2(i, 0);
    for (int j = 1; j < num_actions; ++j) best = std::max(best, qn.at2(i, j));
    ys[static_cast<size_t>(i)] = rewards[static_cast<size_t>(i)] +
                                 cfg.discount * not_done[static_cast<size_t>(i)] * best;
  }

  grad::Tape tape;
  grad::ParamSet params;
  params.add_mlp("q", &state.q);
  std::vector<grad::Tape::Id> pids;
  pids.reserve(params.size());
  for (const grad::ParamRef& ref : params.refs())
    pids.push_back(tape.input(*ref.tensor));

  grad::Tape::Id h = tape.constant(std::move(xs));
  for (size_t l = 0; l < state.q.layers.size(); ++l) {
    h = tape.affine(h, pids[2 * l], pids[2 * l + 1]);
    if (l + 1 < state.q.layers.size()) h = tape.tanh(h);
  }
  grad::Tape::Id flat = tape.reshape(h, {m * num_actions});
  grad::Tape::Id qa = tape.gather(
      flat, std::make_shared<const std::vector<int64_t>>(std::move(picked)), {m});

  int64_t ym = m;
  grad::Tape::Id y =
      tape.constant(grad::Tensor::from({ym}, std::move(ys)));
  grad::Tape::Id u = tape.sub(qa, y);
  // Huber: 0.5*u^2 - 0.5*relu(|u| - delta)^2, with |u| = relu(u) + relu(-u).
  grad::Tape::Id absu = tape.add(tape.relu(u), tape.relu(tape.mul_scalar(u, -1.0)));
  grad::Tape::Id excess = tape.relu(tape.add_scalar(absu, -cfg.huber_delta));
  grad::Tape::Id loss = tape.mean_all(
      tape.sub(tape.mul_scalar(tape.mul(u, u), 0.5),
               tape.mul_scalar(tape.mul(excess, excess), 0.5)));

  tape.backward(loss);
  std::vector<grad::Tensor> grads;
  grads.reserve(pids.size());
  for (size_t i = 0; i < pids.size(); ++i) {
    if (tape.has_grad(pids[i]))
      grads.push_back(tape.grad(pids[i]));
    else
      grads.emplace_back(params.refs()[i].tensor->shape(), 0.0);
  }
  opt.step(params, grads, /*max_grad_norm=*/0.0);

  ++state.updates;
  if (cfg.target_sync > 0 && state.updates % cfg.target_sync == 0)
    state.target = state.q;
  return tape.scalar(loss);
}

DqnResult offpolicy_pretrain(DqnState& state, const ReplayBuffer& buffer,
                             const DqnConfig& cfg) {
  grad::Adam opt(cfg.learning_rate);
  util::Rng rng(cfg.seed ^ 0xd9b4ULL);
  DqnResult res;
  for (int64_t u = 0; u < cfg.updates; ++u)
    res.final_loss = dqn_update(state, opt, buffer, cfg, rng);
  res.updates = cfg.updates;
  return res;
}

DqnResult dqn_finetune_online(DqnState& state, env::Env& env,
                              ReplayBuffer& buffer, const DqnConfig& cfg,
                              int64_t steps, double epsilon) {
  if (env.obs_dim() != buffer.obs_dim())
    throw std::invalid_argument("dqn_finetune_online: obs_dim mismatch");
  grad::Adam opt(cfg.learning_rate);
  util::Rng rng(cfg.seed ^ 0xf17eULL);
  grad::Tensor cur = env.reset(rng.next_u64()).x;
  DqnResult res;
  for (int64_t s = 0; s < steps; ++s) {
    Transition t;
    t.x_on = sparse_obs(cur);
    t.action = (rng.uniform() < epsilon)
                   ? static_cast<int>(rng.randint(env.num_actions()))
                   : greedy_q_action(state.q, cur);
    env::StepResult r = env.step(t.action);
    t.xnext_on = sparse_obs(r.obs.x);
    t.reward = r.reward;
    t.done = r.done ? 1 : 0;
    buffer.push(std::move(t));
    cur = r.done ? env.reset(rng.next_u64()).x : std::move(r.obs.x);
    res.final_loss = dqn_update(state, opt, buffer, cfg, rng);
  }
  res.updates = steps;
  return res;
}

int greedy_q_action(const grad::Mlp& q, const grad::Tensor& x) {
  grad::Tensor row = x;
  if (row.rank() == 1) {
    int64_t d = row.size();
    row = grad::Tensor::from({1, d}, std::vector<double>(row.vec()));
  }
  grad::Tensor qs = q_plain(q, row);
  return row_argmax(qs, 0);
}

void save_q_net(const grad::Mlp& q, int64_t obs_dim, const std::string& path) {
  std::string s(kQNetMagic, 8);
  put_u32(s, kFormatVersion);
  put_u64(s, static_cast<uint64_t>(obs_dim));
  put_u32(s, static_cast<uint32_t>(q.layers.size()));
  for (const grad::Linear& l : q.layers) {
    put_tensor(s, l.w);
    put_tensor(s, l.b);
  }
  seal_and_write(std::move(s), path);
}

grad::Mlp load_q_net(const std::string& path, int64_t* obs_dim) {
  std::string blob = util::read_file(path);
  util::BinReader r = open_blob(blob, kQNetMagic, path);
  uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported q-net version " +
                             std::to_string(version) + ": " + path);
  int64_t dim = static_cast<int64_t>(r.u64());
  uint32_t n = r.u32();
  if (n == 0 || n > 64) throw std::runtime_error("corrupt q-net: layer count");
  grad::Mlp q;
  q.layers.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    grad::Linear l;
    l.w = read_tensor(r);
    l.b = read_tensor(r);
    if (l.w.rank() != 2 || l.b.rank() != 1 || l.w.dim(1) != l.b.dim(0))
      throw std::runtime_error("corrupt q-net: layer shape");
    q.layers.push_back(std::move(l));
  }
  if (q.layers.front().w.dim(0) != dim)
    throw std::runtime_error("corrupt q-net: input width");
  if (obs_dim) *obs_dim = dim;
  return q;
}

}  // namespace hyrl::train
