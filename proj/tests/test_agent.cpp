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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "hyrl/agent/agent.hpp"
#include "hyrl/env/env.hpp"
#include "hyrl/options/worker.hpp"
#include "hyrl/util/io.hpp"
#include "hyrl/util/rng.hpp"

using namespace hyrl;
using agent::ActionDist;
using agent::Facts;

namespace {

std::unique_ptr<env::Env> fresh_env(
    const std::string& id, env::ActionSpace space = env::ActionSpace::kDiscrete,
    uint64_t seed = 7) {
  env::EnvConfig cfg;
  cfg.env_id = id;
  cfg.action_space = space;
  cfg.seed = seed;
  return env::make_env(cfg);
}

agent::HybridAgent small_agent(const env::Env& proto, std::string gate_rules = "",
                               uint64_t seed = 11) {
  agent::HybridConfig cfg;
  cfg.manager_rules_path = "rules/minikangaroo.rules";
  cfg.gate_rules_path = std::move(gate_rules);
  cfg.policy_hidden = {32};
  cfg.gate_hidden = {16};
  cfg.critic_hidden = {16};
  return agent::HybridAgent(
      cfg, proto,
      options::scripted_worker_set("minikangaroo", proto.config().action_space),
      seed);
}

Facts facts_named(const env::Env& proto, const std::vector<std::string>& on) {
  Facts z;
  for (const std::string& atom : proto.fact_signature()) {
    bool base_on = false;
    for (const std::string& name : on)
      if (atom == name) base_on = true;
    bool is_dual = atom.rfind("not_", 0) == 0;
    bool dual_on = false;
    if (is_dual)
      for (const std::string& name : on)
        if (atom.substr(4) == name) dual_on = true;
    z.emplace_back(atom, is_dual ? (dual_on ? 0 : 1) : (base_on ? 1 : 0));
  }
  return z;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("manager ranks options from the fact state") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  const agent::LogicManager& m = a.manager();
  REQUIRE(m.options() == std::vector<std::string>{"ascend", "deal_with_enemy"});

  Facts quiet = facts_named(*e, {"nothing_around(player)"});
  std::vector<double> d = m.option_dist(quiet);
  CHECK(d[0] >= 0.9);
  CHECK(m.argmax_option(quiet) == 0);

  Facts threat = facts_named(*e, {"close_by_monkey(player,monkey)"});
  d = m.option_dist(threat);
  CHECK(d[1] >= 0.9);
  CHECK(m.argmax_option(threat) == 1);

  Facts ladder = facts_named(*e, {"on_ladder(player,ladder)"});
  CHECK(m.argmax_option(ladder) == 0);
}

TEST_CASE("all-false facts yield the uniform option distribution") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  Facts none = facts_named(*e, {});
  std::vector<double> d = a.manager().option_dist(none);
  CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-9));
  // Ties break toward the lowest option index.
  CHECK(a.manager().argmax_option(none) == 0);
}

TEST_CASE("normalization preserves the option argmax") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  util::Rng rng(5);
  for (int trial = 0; trial < 32; ++trial) {
    Facts z;
    for (const std::string& atom : e->fact_signature())
      z.emplace_back(atom, static_cast<uint8_t>(rng.randint(2)));
    std::vector<double> d = a.manager().option_dist(z);
    int best = 0;
    for (size_t i = 1; i < d.size(); ++i)
      if (d[i] > d[static_cast<size_t>(best)]) best = static_cast<int>(i);
    CHECK(a.manager().argmax_option(z) == best);
  }
}

TEST_CASE("hybrid mixture is convex and normalized") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  util::Rng rng(40);
  for (int t = 0; t < 60; ++t) {
    Facts z = e->symbolic_facts();
    agent::HybridAgent::Forward f = a.forward(obs.x, z);
    double sum = 0.0;
    for (size_t i = 0; i < f.pi_h.probs.size(); ++i) {
      double lo = std::min(f.pi_l.probs[i], f.pi_n.probs[i]);
      double hi = std::max(f.pi_l.probs[i], f.pi_n.probs[i]);
      CHECK(f.pi_h.probs[i] >= lo - 1e-12);
      CHECK(f.pi_h.probs[i] <= hi + 1e-12);
      sum += f.pi_h.probs[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(f.beta[0] + f.beta[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.v_h == doctest::Approx(f.beta[0] * f.v_l + f.beta[1] * f.v_n));
    env::StepResult r = e->step(static_cast<int>(rng.randint(e->num_actions())));
    obs = r.obs;
    if (r.done) obs = e->reset(rng.next_u64());
  }
}

TEST_CASE("degenerate gates reduce the mixture to one branch") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  Facts z = e->symbolic_facts();
  agent::HybridAgent::Forward f = a.forward(obs.x, z);

  ActionDist all_logic = agent::mix_policies(f.pi_l, f.pi_n, {1.0, 0.0});
  ActionDist all_neural = agent::mix_policies(f.pi_l, f.pi_n, {0.0, 1.0});
  for (size_t i = 0; i < all_logic.probs.size(); ++i) {
    CHECK(all_logic.probs[i] == f.pi_l.probs[i]);
    CHECK(all_neural.probs[i] == f.pi_n.probs[i]);
  }

  // Mixing is symmetric under swapping branches and weights.
  ActionDist ab = agent::mix_policies(f.pi_l, f.pi_n, {0.3, 0.7});
  ActionDist ba = agent::mix_policies(f.pi_n, f.pi_l, {0.7, 0.3});
  for (size_t i = 0; i < ab.probs.size(); ++i)
    CHECK(ab.probs[i] == doctest::Approx(ba.probs[i]).epsilon(1e-15));
}

TEST_CASE("fresh neural gate starts at an even blend") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  std::array<double, 2> b = a.gate().beta(obs.x, e->symbolic_facts());
  CHECK(b[0] == 0.5);
  CHECK(b[1] == 0.5);
}

TEST_CASE("logic gate hands quiet states to the logic branch") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e, "rules/minikangaroo_gate.rules");
  env::ObsPair obs = e->reset();
  // Start (6,11): no monkey within reach, nothing_around holds.
  std::array<double, 2> b = a.gate().beta(obs.x, e->symbolic_facts());
  CHECK(b[0] > b[1]);
  CHECK(b[0] > 0.99);

  // Next to the monkey home the threat fact flips the gate.
  obs = e->step(env::kLeft).obs;
  b = a.gate().beta(obs.x, e->symbolic_facts());
  CHECK(b[1] > b[0]);
}

TEST_CASE("sampling returns the exact log-probability") {
  util::Rng rng(9);

  ActionDist det;
  det.probs = {0, 0, 1, 0, 0, 0};
  agent::Sampled s = agent::sample_and_logprob(det, rng);
  CHECK(s.discrete == 2);
  CHECK(s.logprob == 0.0);

  ActionDist uni;
  uni.probs = {0.25, 0.25, 0.25, 0.25, 0, 0};
  for (int t = 0; t < 8; ++t) {
    s = agent::sample_and_logprob(uni, rng);
    CHECK(s.discrete < 4);
    CHECK(s.logprob == doctest::Approx(-std::log(4.0)));
  }
  CHECK(agent::entropy_of(uni) == doctest::Approx(std::log(4.0)));
  CHECK(agent::argmax_action(det) == 2);
}

TEST_CASE("mixture density integrates to one") {
  ActionDist d;
  d.space = env::ActionSpace::kContinuous;
  d.components.push_back({0.3, {-0.2, 0.1}, {-1.0, -0.5}});
  d.components.push_back({0.7, {0.4, -0.3}, {-0.5, -1.0}});

  double step = 0.02, mass = 0.0;
  for (double x = -4.0; x < 4.0; x += step)
    for (double y = -4.0; y < 4.0; y += step)
      mass += std::exp(agent::logprob_of(d, {x + step / 2, y + step / 2})) *
              step * step;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));

  util::Rng rng(17);
  for (int t = 0; t < 16; ++t) {
    agent::Sampled s = agent::sample_and_logprob(d, rng);
    CHECK(s.logprob == doctest::Approx(agent::logprob_of(d, s.continuous)));
  }
}

TEST_CASE("continuous hybrid policy is a two-branch mixture") {
  auto e = fresh_env("minikangaroo", env::ActionSpace::kContinuous);
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  agent::HybridAgent::Forward f = a.forward(obs.x, e->symbolic_facts());
  REQUIRE(f.pi_h.components.size() == 2);
  double total = 0.0;
  for (const auto& c : f.pi_h.components) total += c.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // The logic branch wraps the scripted worker's action tightly.
  CHECK(f.pi_h.components[0].log_std[0] == options::kContinuousLogStd);

  util::Rng rng(3);
  agent::Sampled s = agent::sample_and_logprob(f.pi_h, rng);
  CHECK(std::isfinite(s.logprob));
  std::array<double, 2> g = agent::greedy_continuous(f.pi_h);
  CHECK(std::abs(g[0]) <= 1.0);
}

TEST_CASE("symbolic critic validates its input") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  e->reset();
  Facts z = e->symbolic_facts();
  double v1 = a.critic().value(z);
  CHECK(std::isfinite(v1));
  CHECK(a.critic().value(z) == v1);

  Facts swapped = z;
  std::swap(swapped[0], swapped[1]);
  CHECK_THROWS_AS(a.critic().encode(swapped), std::invalid_argument);
  Facts truncated(z.begin(), z.end() - 1);
  CHECK_THROWS_AS(a.critic().encode(truncated), std::invalid_argument);

  std::vector<Facts> batch = {z, z};
  grad::Tensor vb = a.critic().value_batch(batch);
  CHECK(vb.at(0) == v1);
  CHECK(vb.at(1) == v1);
}

TEST_CASE("neural updates cannot leak into the logic branch") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  Facts z = e->symbolic_facts();

  ActionDist before = a.logic_policy(obs.x, z);
  uint64_t wd = a.worker_digest();
  for (double& v : a.policy().policy_head.b.vec()) v += 1.0;
  for (auto& layer : a.gate().net().layers)
    for (double& v : layer.b.vec()) v += 0.5;
  ActionDist after = a.logic_policy(obs.x, z);

  CHECK(before.probs == after.probs);
  CHECK(a.worker_digest() == wd);
  // The neural branch did move.
  agent::HybridAgent::Forward f = a.forward(obs.x, z);
  CHECK(f.pi_n.probs != before.probs);
}

TEST_CASE("tape and plain inference agree") {
  util::Rng rng(21);
  grad::Mlp m = grad::Mlp::make(5, {7, 4}, 3, rng);
  grad::Tensor xs({2, 5});
  for (int64_t i = 0; i < xs.size(); ++i)
    xs.at(i) = rng.uniform(-1.0, 1.0);

  grad::Tensor plain = agent::detail::mlp_plain(m, xs);
  grad::Tape t;
  grad::Tape::Id y = grad::forward(t, grad::bind(t, m), t.constant(xs));
  for (int64_t i = 0; i < plain.size(); ++i)
    CHECK(plain.at(i) == doctest::Approx(t.value(y).at(i)).epsilon(1e-12));

  // Full policy path: encoder with output tanh, then both heads.
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  grad::Tensor row = grad::Tensor::from({1, e->obs_dim()}, obs.x.vec());
  agent::PolicyEval pe = agent::policy_eval(a.policy(), row);

  grad::Tape t2;
  grad::Tape::Id h =
      t2.tanh(grad::forward(t2, grad::bind(t2, a.policy().encoder), t2.constant(row)));
  grad::Tape::Id logits = grad::apply(t2, grad::bind(t2, a.policy().policy_head), h);
  grad::Tape::Id value = grad::apply(t2, grad::bind(t2, a.policy().value_head), h);
  for (int64_t i = 0; i < pe.head.size(); ++i)
    CHECK(pe.head.at(i) == doctest::Approx(t2.value(logits).at(i)).epsilon(1e-12));
  CHECK(pe.value.at(0) == doctest::Approx(t2.value(value).at(0)).epsilon(1e-12));
}

TEST_CASE("agent checkpoints restore behavior exactly") {
  std::string dir = tmp_path("hyrl_agent_ckpt");
  std::filesystem::create_directories(dir);
  std::string rules = dir + "/manager.rules";
  util::write_file(rules, util::read_file("rules/minikangaroo.rules"));

  auto e = fresh_env("minikangaroo");
  agent::HybridConfig cfg;
  cfg.manager_rules_path = rules;
  cfg.policy_hidden = {24};
  cfg.gate_hidden = {8};
  cfg.critic_hidden = {8};
  options::WorkerSet workers =
      options::scripted_worker_set("minikangaroo", env::ActionSpace::kDiscrete);
  agent::HybridAgent a(cfg, *e, workers, 99);

  // Perturb away from init so the round-trip is not trivially the ctor state.
  for (double& v : a.policy().policy_head.w.vec()) v += 0.01;
  a.manager().weights().one_hot(0, 0);
  a.manager().invalidate_cache();

  env::ObsPair obs = e->reset();
  Facts z = e->symbolic_facts();
  agent::HybridAgent::Forward want = a.forward(obs.x, z);

  std::string path = dir + "/agent.ckpt";
  agent::save_agent(a, path);
  agent::HybridAgent b = agent::load_agent(path, *e, workers);
  agent::HybridAgent::Forward got = b.forward(obs.x, z);

  CHECK(got.pi_h.probs == want.pi_h.probs);
  CHECK(got.v_h == want.v_h);
  CHECK(got.beta == want.beta);
  CHECK(got.option == want.option);

  SUBCASE("a changed rule file is rejected") {
    util::write_file(rules, util::read_file(rules) + "\n# tweaked\n");
    CHECK_THROWS_WITH_AS(agent::load_agent(path, *e, workers),
                         doctest::Contains("rule file changed"),
                         std::runtime_error);
  }

  SUBCASE("changed worker parameters are rejected") {
    util::Rng rng(1);
    options::WorkerSet other = workers;
    other["ascend"] = std::make_shared<options::NeuralWorker>(
        "ascend", env::ActionSpace::kDiscrete,
        grad::Mlp::make(e->obs_dim(), {4}, env::kNumActions, rng), 0);
    CHECK_THROWS_WITH_AS(agent::load_agent(path, *e, other),
                         doctest::Contains("worker parameters"),
                         std::runtime_error);
  }

  SUBCASE("the wrong environment is rejected") {
    auto sq = fresh_env("miniseaquest");
    options::WorkerSet sqw =
        options::scripted_worker_set("miniseaquest", env::ActionSpace::kDiscrete);
    CHECK_THROWS_AS(agent::load_agent(path, *sq, sqw), std::runtime_error);
  }
}

TEST_CASE("neural export needs no rules to act") {
  auto e = fresh_env("minikangaroo");
  auto a = small_agent(*e);
  env::ObsPair obs = e->reset();
  ActionDist want = agent::neural_dist(a.policy(), obs.x);

  std::string path = tmp_path("hyrl_neural.ckpt");
  agent::save_neural(a.policy(), path);
  agent::NeuralPolicy p = agent::load_neural(path);
  CHECK(p.param_digest() == a.policy().param_digest());

  ActionDist got = agent::neural_dist(p, obs.x);
  CHECK(got.probs == want.probs);

  std::string blob = util::read_file(path);
  blob[20] ^= 0x01;
  util::write_file(path, blob);
  CHECK_THROWS_AS(agent::load_neural(path), std::runtime_error);
}
