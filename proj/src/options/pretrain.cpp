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

#include "hyrl/options/pretrain.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "hyrl/agent/agent.hpp"
#include "hyrl/train/train.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::options {

namespace {

// How a gate scores one episode's final info map (with max-tracking for
// counters that can go down again, like carried divers).
enum class Metric {
  kFracTopFloor,       // fraction of episodes with floor_reached >= 3
  kFracAlive,          // fraction of episodes ending with oxygen > 0
  kFracJumped,         // fraction of episodes with barrels_jumped >= 1
  kMeanInfo,           // mean of the final value of `key`
  kMeanMaxInfo,        // mean of the per-episode max of `key`
};

struct GateSpec {
  const char* env_id;
  std::vector<std::string> mods;
  Metric metric;
  const char* key;
  double threshold;
  int episodes;
};

// One gate per option. Thresholds are the documented competence bars; every
// scripted controller clears its own bar, so a trained worker that fails is
// genuinely undertrained rather than mis-measured.
GateSpec gate_spec(const std::string& option_id) {
  if (option_id == "ascend")
    return {"minikangaroo", {"disable_enemies"}, Metric::kFracTopFloor,
            "floor_reached", 0.9, 20};
  if (option_id == "deal_with_enemy")
    return {"minikangaroo", {}, Metric::kMeanInfo, "monkeys_punched", 2.0, 20};
  if (option_id == "get_air")
    return {"miniseaquest", {}, Metric::kFracAlive, "oxygen", 0.9, 20};
  if (option_id == "get_diver")
    return {"miniseaquest", {"unlimited_oxygen"}, Metric::kMeanMaxInfo,
            "divers", 1.0, 20};
  if (option_id == "deliver_diver")
    return {"miniseaquest", {"unlimited_oxygen"}, Metric::kMeanInfo,
            "delivered", 1.0, 20};
  if (option_id == "shoot_enemy")
    return {"miniseaquest", {}, Metric::kMeanInfo, "enemies_shot", 2.0, 20};
  if (option_id == "climb")
    return {"minidonkeykong", {"disable_enemies"}, Metric::kFracTopFloor,
            "floor_reached", 0.9, 20};
  if (option_id == "jump_barrel")
    return {"minidonkeykong", {"spawn_barrel_near_player", "no_hammer"},
            Metric::kFracJumped, "barrels_jumped", 0.8, 20};
  if (option_id == "use_hammer")
    return {"minidonkeykong", {}, Metric::kMeanInfo, "hammer_hits", 1.0, 20};
  throw std::invalid_argument("no competence gate for option: " + option_id);
}

double info_value(const std::map<std::string, double>& info, const char* key) {
  auto it = info.find(key);
  return it == info.end() ? 0.0 : it->second;
}

int argmax_probs(const std::vector<double>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

OptionSpec default_option_spec(const std::string& option_id,
                               const std::string& env_id,
                               env::ActionSpace space) {
  GateSpec gate = gate_spec(option_id);  // validates the option id
  if (env_id != gate.env_id)
    throw std::invalid_argument("option " + option_id + " belongs to " +
                                gate.env_id + ", not " + env_id);
  OptionSpec spec;
  spec.option_id = option_id;
  spec.env_id = env_id;
  spec.action_space = space;
  // Practice environment: ascent options get checkpoint shaping on top of
  // the gate variant; the rest train where their intrinsic reward lives.
  if (option_id == "ascend" || option_id == "climb")
    spec.modifications = {"disable_enemies", "platform_checkpoints"};
  else
    spec.modifications = gate.mods;
  return spec;
}

GateReport run_competence_gate(const OptionWorker& worker,
                               const std::string& env_id, uint64_t seed) {
  GateSpec gate = gate_spec(worker.option_id());
  if (env_id != gate.env_id)
    throw std::invalid_argument("option " + worker.option_id() +
                                " gates on " + gate.env_id + ", not " + env_id);

  env::EnvConfig cfg;
  cfg.env_id = gate.env_id;
  cfg.action_space = env::ActionSpace::kDiscrete;
  cfg.modifications = gate.mods;
  auto env = env::make_env(cfg);

  // Delivery is only measurable with divers on board, so that gate drives a
  // scripted pickup prefix before handing control to the candidate.
  std::unique_ptr<OptionWorker> prefix;
  if (worker.option_id() == "deliver_diver")
    prefix = make_scripted_worker("get_diver", env::ActionSpace::kDiscrete);

  util::Rng rng(seed);
  double sum = 0.0;
  for (int ep = 0; ep < gate.episodes; ++ep) {
    env::ObsPair obs = env->reset(rng.next_u64());
    std::map<std::string, double> info;
    double peak = 0.0;
    bool prefixing = prefix != nullptr;
    while (!env->done()) {
      if (prefixing && (info_value(info, "divers") >= 1.0 || env->steps() >= 80))
        prefixing = false;
      const OptionWorker& actor = prefixing ? *prefix : worker;
      env::StepResult r = env->step(argmax_probs(actor.action_probs(obs.x)));
      obs = std::move(r.obs);
      info = std::move(r.info);
      peak = std::max(peak, info_value(info, gate.key));
    }
    switch (gate.metric) {
      case Metric::kFracTopFloor:
        sum += info_value(info, "floor_reached") >= 3.0 ? 1.0 : 0.0;
        break;
      case Metric::kFracAlive:
        sum += info_value(info, "oxygen") > 0.0 ? 1.0 : 0.0;
        break;
      case Metric::kFracJumped:
        sum += info_value(info, "barrels_jumped") >= 1.0 ? 1.0 : 0.0;
        break;
      case Metric::kMeanInfo:
        sum += info_value(info, gate.key);
        break;
      case Metric::kMeanMaxInfo:
        sum += peak;
        break;
    }
  }

  GateReport report;
  report.episodes = gate.episodes;
  report.metric = sum / gate.episodes;
  report.threshold = gate.threshold;
  report.passed = report.metric >= gate.threshold;
  return report;
}

PretrainResult pretrain_option(const OptionSpec& spec, uint64_t seed) {
  if (spec.budget_steps <= 0)
    throw std::invalid_argument("pretrain_option: non-positive budget");
  gate_spec(spec.option_id);  // validates the option id early

  env::EnvConfig ecfg;
  ecfg.env_id = spec.env_id;
  ecfg.action_space = env::ActionSpace::kDiscrete;
  ecfg.modifications = spec.modifications;

  train::TrainConfig tcfg;
  tcfg.num_envs = 8;
  tcfg.rollout_steps = 64;
  tcfg.total_steps = spec.budget_steps;
  tcfg.seed = seed;
  tcfg.validate();

  auto envs = train::make_env_vec(ecfg, tcfg.num_envs, seed);
  util::Rng init_rng(seed ^ 0x097eULL);
  agent::NeuralPolicy policy = agent::NeuralPolicy::make(
      envs[0]->obs_dim(), env::ActionSpace::kDiscrete, spec.hidden, init_rng);

  train::RolloutDriver driver(&envs, tcfg.seed);
  grad::Adam opt(tcfg.learning_rate);
  util::Rng ppo_rng(tcfg.seed ^ 0x5eedULL);
  const int64_t per_update =
      static_cast<int64_t>(tcfg.num_envs) * tcfg.rollout_steps;
  const int64_t updates = (tcfg.total_steps + per_update - 1) / per_update;
  for (int64_t u = 0; u < updates; ++u) {
    train::RolloutBatch batch = driver.collect(policy, tcfg.rollout_steps);
    train::compute_gae(batch, tcfg);
    train::ppo_update(policy, opt, batch, tcfg, ppo_rng);
  }

  // The worker carries the encoder and policy head as one frozen stack; the
  // value head stays behind with the trainer.
  grad::Mlp net;
  net.layers = policy.encoder.layers;
  net.layers.push_back(policy.policy_head);

  uint64_t digest = util::fnv1a(spec.option_id);
  digest = util::fnv1a(spec.env_id, digest);
  for (const std::string& m : spec.modifications) digest = util::fnv1a(m, digest);
  uint64_t tail[2] = {seed, static_cast<uint64_t>(spec.budget_steps)};
  digest = util::fnv1a(tail, sizeof tail, digest);

  PretrainResult result;
  result.worker = std::make_shared<NeuralWorker>(
      spec.option_id, spec.action_space, std::move(net), digest);
  result.gate = run_competence_gate(*result.worker, spec.env_id, seed ^ 0x6a7eULL);
  result.env_steps = driver.total_steps();
  return result;
}

}  // namespace hyrl::options
