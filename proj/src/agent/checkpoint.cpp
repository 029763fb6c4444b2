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

#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>

#include "hyrl/agent/agent.hpp"
#include "hyrl/util/binio.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::agent {

namespace {

using util::put_f64;
using util::put_str;
using util::put_u32;
using util::put_u64;
using util::put_u8;

constexpr char kAgentMagic[] = "HYRLAGT1";
constexpr char kNeuralMagic[] = "HYRLNPL1";
constexpr uint32_t kFormatVersion = 1;

void put_tensor(std::string& s, const grad::Tensor& t) {
  put_u32(s, static_cast<uint32_t>(t.rank()));
  for (size_t i = 0; i < t.rank(); ++i)
    put_u64(s, static_cast<uint64_t>(t.dim(i)));
  for (int64_t i = 0; i < t.size(); ++i) put_f64(s, t.at(i));
}

grad::Tensor read_tensor(util::BinReader& r) {
  uint32_t rank = r.u32();
  if (rank > 4) throw std::runtime_error("corrupt checkpoint: tensor rank");
  std::vector<int64_t> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(r.u64());
  grad::Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t.at(i) = r.f64();
  return t;
}

void put_linear(std::string& s, const grad::Linear& l) {
  put_tensor(s, l.w);
  put_tensor(s, l.b);
}

grad::Linear read_linear(util::BinReader& r) {
  grad::Linear l;
  l.w = read_tensor(r);
  l.b = read_tensor(r);
  if (l.w.rank() != 2 || l.b.rank() != 1 || l.w.dim(1) != l.b.dim(0))
    throw std::runtime_error("corrupt checkpoint: layer shape");
  return l;
}

void put_mlp(std::string& s, const grad::Mlp& m) {
  put_u32(s, static_cast<uint32_t>(m.layers.size()));
  for (const grad::Linear& l : m.layers) put_linear(s, l);
}

grad::Mlp read_mlp(util::BinReader& r) {
  uint32_t n = r.u32();
  if (n == 0 || n > 64) throw std::runtime_error("corrupt checkpoint: layer count");
  grad::Mlp m;
  m.layers.reserve(n);
  for (uint32_t i = 0; i < n; ++i) m.layers.push_back(read_linear(r));
  return m;
}

void seal_and_write(std::string blob, const std::string& path) {
  put_u64(blob, util::fnv1a(blob));
  util::write_file(path, blob);
}

// Verifies magic and trailing digest, returns a reader past the magic.
util::BinReader open_blob(const std::string& blob, const char* magic,
                          const std::string& path) {
  if (blob.size() < 16 || blob.compare(0, 8, magic) != 0)
    throw std::runtime_error("not a " + std::string(magic) +
                             " checkpoint: " + path);
  util::BinReader tail(blob, blob.size() - 8);
  uint64_t stored = tail.u64();
  if (util::fnv1a(blob.data(), blob.size() - 8) != stored)
    throw std::runtime_error("checkpoint digest mismatch: " + path);
  return util::BinReader(blob, 8);
}

}  // namespace

void save_agent(const HybridAgent& agent, const std::string& path) {
  const HybridConfig& cfg = agent.config();
  const NeuralPolicy& p = agent.policy();

  std::string s(kAgentMagic, 8);
  put_u32(s, kFormatVersion);
  put_u8(s, agent.gate().mode() == GateMode::kLogic ? 0 : 1);
  put_u8(s, p.space == env::ActionSpace::kDiscrete ? 0 : 1);
  put_u8(s, cfg.manager_argmax ? 1 : 0);
  put_u8(s, cfg.theta_trainable ? 1 : 0);
  put_u32(s, static_cast<uint32_t>(cfg.reason_cfg.steps));
  put_f64(s, cfg.reason_cfg.gamma);
  put_u64(s, static_cast<uint64_t>(p.obs_dim));

  put_str(s, cfg.manager_rules_path);
  put_u64(s, agent.manager().rule_digest());
  put_str(s, cfg.gate_rules_path);
  put_u64(s, agent.gate().rule_digest());
  put_u64(s, agent.worker_digest());

  const auto& sig = agent.critic().signature();
  put_u32(s, static_cast<uint32_t>(sig.size()));
  for (const std::string& a : sig) put_str(s, a);

  put_tensor(s, agent.manager().weights().w);
  put_mlp(s, p.encoder);
  put_linear(s, p.policy_head);
  put_linear(s, p.value_head);
  put_tensor(s, p.log_std);
  if (agent.gate().mode() == GateMode::kNeural) put_mlp(s, agent.gate().net());
  put_mlp(s, agent.critic().net());

  seal_and_write(std::move(s), path);
}

HybridAgent load_agent(const std::string& path, const env::Env& proto,
                       options::WorkerSet workers) {
  std::string blob = util::read_file(path);
  util::BinReader r = open_blob(blob, kAgentMagic, path);

  uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + ": " + path);
  bool neural_gate = r.u8() != 0;
  env::ActionSpace space =
      r.u8() == 0 ? env::ActionSpace::kDiscrete : env::ActionSpace::kContinuous;
  HybridConfig cfg;
  cfg.manager_argmax = r.u8() != 0;
  cfg.theta_trainable = r.u8() != 0;
  cfg.reason_cfg.steps = static_cast<int>(r.u32());
  cfg.reason_cfg.gamma = r.f64();
  int64_t obs_dim = static_cast<int64_t>(r.u64());

  cfg.manager_rules_path = r.str();
  uint64_t manager_digest = r.u64();
  cfg.gate_rules_path = r.str();
  uint64_t gate_digest = r.u64();
  uint64_t worker_digest = r.u64();
  if (neural_gate != cfg.gate_rules_path.empty())
    throw std::runtime_error("corrupt checkpoint: gate mode disagrees with path");

  uint32_t n_sig = r.u32();
  std::vector<std::string> signature(n_sig);
  for (uint32_t i = 0; i < n_sig; ++i) signature[i] = r.str();

  if (space != proto.config().action_space)
    throw std::runtime_error("checkpoint action space does not match environment");
  if (obs_dim != proto.obs_dim())
    throw std::runtime_error("checkpoint observation width " +
                             std::to_string(obs_dim) + " does not match " +
                             std::to_string(proto.obs_dim()));
  if (signature != proto.fact_signature())
    throw std::runtime_error("checkpoint fact signature does not match environment");

  HybridAgent agent(cfg, proto, std::move(workers), /*seed=*/0);
  if (agent.manager().rule_digest() != manager_digest)
    throw std::runtime_error("rule file changed since checkpoint: " +
                             cfg.manager_rules_path);
  if (agent.gate().rule_digest() != gate_digest)
    throw std::runtime_error("gate rule file changed since checkpoint: " +
                             cfg.gate_rules_path);
  if (agent.worker_digest() != worker_digest)
    throw std::runtime_error("worker parameters changed since checkpoint");

  grad::Tensor theta = read_tensor(r);
  if (!theta.same_shape(agent.manager().weights().w))
    throw std::runtime_error("corrupt checkpoint: rule weight shape");
  agent.manager().weights().w = std::move(theta);
  agent.manager().invalidate_cache();

  NeuralPolicy& p = agent.policy();
  p.encoder = read_mlp(r);
  p.policy_head = read_linear(r);
  p.value_head = read_linear(r);
  p.log_std = read_tensor(r);
  if (neural_gate) agent.gate().net() = read_mlp(r);
  agent.critic().net() = read_mlp(r);
  return agent;
}

void save_neural(const NeuralPolicy& p, const std::string& path) {
  std::string s(kNeuralMagic, 8);
  put_u32(s, kFormatVersion);
  put_u8(s, p.space == env::ActionSpace::kDiscrete ? 0 : 1);
  put_u64(s, static_cast<uint64_t>(p.obs_dim));
  put_mlp(s, p.encoder);
  put_linear(s, p.policy_head);
  put_linear(s, p.value_head);
  put_tensor(s, p.log_std);
  seal_and_write(std::move(s), path);
}

NeuralPolicy load_neural(const std::string& path) {
  std::string blob = util::read_file(path);
  util::BinReader r = open_blob(blob, kNeuralMagic, path);
  uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + ": " + path);
  NeuralPolicy p;
  p.space = r.u8() == 0 ? env::ActionSpace::kDiscrete : env::ActionSpace::kContinuous;
  p.obs_dim = static_cast<int64_t>(r.u64());
  p.encoder = read_mlp(r);
  p.policy_head = read_linear(r);
  p.value_head = read_linear(r);
  p.log_std = read_tensor(r);
  if (p.encoder.layers.front().w.dim(0) != p.obs_dim)
    throw std::runtime_error("corrupt checkpoint: encoder width");
  return p;
}

}  // namespace hyrl::agent
