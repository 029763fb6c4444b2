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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "hyrl/env/env.hpp"
#include "hyrl/logic/parser.hpp"
#include "hyrl/options/worker.hpp"
#include "hyrl/util/io.hpp"
#include "hyrl/util/rng.hpp"

using namespace hyrl;

namespace {

std::unique_ptr<env::Env> fresh_env(const std::string& id,
                                    std::vector<std::string> mods = {},
                                    uint64_t seed = 7) {
  env::EnvConfig cfg;
  cfg.env_id = id;
  cfg.modifications = std::move(mods);
  cfg.seed = seed;
  return env::make_env(cfg);
}

int act_of(const options::OptionWorker& w, const grad::Tensor& x) {
  std::vector<double> p = w.action_probs(x);
  int best = 0;
  for (size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scripted ascend climbs to the joey") {
  auto e = fresh_env("minikangaroo", {"disable_enemies"});
  auto w = options::make_scripted_worker("ascend", env::ActionSpace::kDiscrete);
  env::ObsPair obs = e->reset();
  double total = 0.0;
  int steps = 0;
  while (!e->done() && steps < 400) {
    std::vector<double> p = w->action_probs(obs.x);
    double sum = 0.0;
    for (double q : p) {
      CHECK((q == 0.0 || q == 1.0));
      sum += q;
    }
    CHECK(sum == doctest::Approx(1.0));
    env::StepResult r = e->step(act_of(*w, obs.x));
    obs = r.obs;
    total += r.reward;
    ++steps;
  }
  CHECK(e->done());
  CHECK(total >= 275.0);
}

TEST_CASE("scripted deal_with_enemy closes in and punches") {
  auto e = fresh_env("minikangaroo");
  auto w = options::make_scripted_worker("deal_with_enemy", env::ActionSpace::kDiscrete);
  env::ObsPair obs = e->reset();
  double punched = 0.0;
  for (int t = 0; t < 120 && !e->done(); ++t) {
    env::StepResult r = e->step(act_of(*w, obs.x));
    obs = r.obs;
    punched = r.info.at("monkeys_punched");
  }
  CHECK(punched >= 3.0);
}

TEST_CASE("scripted jump_barrel hops the incoming barrel") {
  auto e = fresh_env("minidonkeykong", {"spawn_barrel_near_player"}, 15);
  auto w = options::make_scripted_worker("jump_barrel", env::ActionSpace::kDiscrete);
  env::ObsPair obs = e->reset();
  double jumped = 0.0;
  for (int t = 0; t < 40 && !e->done(); ++t) {
    env::StepResult r = e->step(act_of(*w, obs.x));
    obs = r.obs;
    jumped = r.info.at("barrels_jumped");
    if (jumped >= 1.0) break;
  }
  CHECK(jumped >= 1.0);
}

TEST_CASE("scripted surfacing workers rise and idle at the top") {
  auto e = fresh_env("miniseaquest");
  for (const char* id : {"get_air", "deliver_diver"}) {
    auto w = options::make_scripted_worker(id, env::ActionSpace::kDiscrete);
    env::ObsPair obs = e->reset();
    e->step(env::kDown);
    obs = e->step(env::kDown).obs;
    CHECK(act_of(*w, obs.x) == env::kUp);
    obs = e->step(env::kUp).obs;
    obs = e->step(env::kUp).obs;
    CHECK(act_of(*w, obs.x) == env::kNoop);
  }
}

TEST_CASE("worker input width is validated") {
  auto w = options::make_scripted_worker("ascend", env::ActionSpace::kDiscrete);
  grad::Tensor bad(std::vector<int64_t>{10});
  CHECK_THROWS_AS(w->action_probs(bad), std::invalid_argument);
  CHECK_THROWS_AS(
      options::make_scripted_worker("fly_to_moon", env::ActionSpace::kDiscrete),
      std::invalid_argument);
}

TEST_CASE("continuous wrapper embeds the discrete argmax") {
  auto e = fresh_env("minikangaroo");
  auto w = options::make_scripted_worker("ascend", env::ActionSpace::kContinuous);
  env::ObsPair obs = e->reset();
  int a = act_of(*w, obs.x);
  std::array<double, 4> g = w->action_gaussian(obs.x);
  auto [ax, ay] = env::inverse_map(a);
  CHECK(g[0] == doctest::Approx(ax));
  CHECK(g[1] == doctest::Approx(ay));
  CHECK(g[2] == doctest::Approx(options::kContinuousLogStd));
  CHECK(g[3] == doctest::Approx(options::kContinuousLogStd));
  CHECK(env::map_continuous(g[0], g[1]) == a);
}

TEST_CASE("neural worker is deterministic and normalized") {
  util::Rng rng(3);
  grad::Mlp net = grad::Mlp::make(8, {16}, env::kNumActions, rng);
  options::NeuralWorker w("probe", env::ActionSpace::kDiscrete, net, 77);
  grad::Tensor x(std::vector<int64_t>{8});
  for (int64_t i = 0; i < 8; ++i) x.at(i) = 0.1 * static_cast<double>(i);
  std::vector<double> p1 = w.action_probs(x);
  std::vector<double> p2 = w.action_probs(x);
  CHECK(p1 == p2);
  double sum = 0.0;
  for (double q : p1) {
    CHECK(q > 0.0);
    sum += q;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(w.training_digest() == 77);
}

TEST_CASE("worker checkpoints round-trip") {
  std::string path = tmp_path("hyrl_worker_a.ckpt");

  SUBCASE("scripted") {
    auto w = options::make_scripted_worker("ascend", env::ActionSpace::kDiscrete);
    options::save_worker(*w, path);
    auto back = options::load_worker(path);
    CHECK(back->option_id() == "ascend");
    CHECK(back->kind() == "scripted");
    CHECK(back->action_space() == env::ActionSpace::kDiscrete);
    CHECK(back->param_digest() == w->param_digest());
  }

  SUBCASE("neural") {
    util::Rng rng(5);
    grad::Mlp net = grad::Mlp::make(6, {4}, env::kNumActions, rng);
    options::NeuralWorker w("probe", env::ActionSpace::kContinuous, net, 123);
    options::save_worker(w, path);
    auto back = options::load_worker(path);
    CHECK(back->kind() == "neural");
    CHECK(back->param_digest() == w.param_digest());
    auto* nw = dynamic_cast<options::NeuralWorker*>(back.get());
    REQUIRE(nw != nullptr);
    CHECK(nw->training_digest() == 123);
    grad::Tensor x(std::vector<int64_t>{6}, 0.5);
    CHECK(w.action_probs(x) == nw->action_probs(x));
  }

  SUBCASE("corruption is detected") {
    auto w = options::make_scripted_worker("climb", env::ActionSpace::kDiscrete);
    options::save_worker(*w, path);
    std::string blob = util::read_file(path);
    blob[blob.size() / 2] ^= 0x40;
    util::write_file(path, blob);
    CHECK_THROWS_AS(options::load_worker(path), std::runtime_error);

    util::write_file(path, blob.substr(0, 10));
    CHECK_THROWS_AS(options::load_worker(path), std::runtime_error);

    util::write_file(path, std::string("NOTMAGIC") + blob.substr(8));
    CHECK_THROWS_AS(options::load_worker(path), std::runtime_error);
  }
}

TEST_CASE("worker registry loads a set from relative paths") {
  std::string dir = tmp_path("hyrl_registry_case");
  std::filesystem::create_directories(dir);
  auto a = options::make_scripted_worker("ascend", env::ActionSpace::kDiscrete);
  auto d = options::make_scripted_worker("deal_with_enemy", env::ActionSpace::kDiscrete);
  options::save_worker(*a, dir + "/ascend.ckpt");
  options::save_worker(*d, dir + "/deal.ckpt");

  std::map<std::string, std::string> entries = {
      {"ascend", "ascend.ckpt"}, {"deal_with_enemy", "deal.ckpt"}};
  options::save_registry(entries, dir + "/workers.json");

  options::WorkerSet set = options::load_worker_set(dir + "/workers.json");
  REQUIRE(set.size() == 2);
  CHECK(set.at("ascend")->option_id() == "ascend");
  CHECK(set.at("deal_with_enemy")->kind() == "scripted");

  // A checkpoint filed under the wrong option id must be rejected.
  entries["ascend"] = "deal.ckpt";
  options::save_registry(entries, dir + "/workers.json");
  CHECK_THROWS_AS(options::load_worker_set(dir + "/workers.json"),
                  std::runtime_error);
}

TEST_CASE("rule heads are extracted in first-use order") {
  logic::Program p = logic::parse_program(util::read_file("rules/miniseaquest.rules"));
  std::vector<std::string> heads = options::rule_head_options(p);
  REQUIRE(heads.size() == 4);
  CHECK(heads[0] == "get_air");
  CHECK(heads[1] == "deliver_diver");
  CHECK(heads[2] == "shoot_enemy");
  CHECK(heads[3] == "get_diver");
}

TEST_CASE("worker coverage validation names the missing option") {
  options::WorkerSet set =
      options::scripted_worker_set("minikangaroo", env::ActionSpace::kDiscrete);
  CHECK_NOTHROW(options::validate_worker_coverage({"ascend", "deal_with_enemy"}, set));
  CHECK_THROWS_WITH_AS(
      options::validate_worker_coverage({"ascend", "use_hammer"}, set),
      "no registered worker for option 'use_hammer'", std::invalid_argument);
}

TEST_CASE("every environment ships a full scripted set") {
  struct Expect {
    const char* env_id;
    const char* rules;
  };
  for (Expect ex : {Expect{"minikangaroo", "rules/minikangaroo.rules"},
                    Expect{"miniseaquest", "rules/miniseaquest.rules"},
                    Expect{"minidonkeykong", "rules/minidonkeykong.rules"}}) {
    logic::Program p = logic::parse_program(util::read_file(ex.rules));
    options::WorkerSet set =
        options::scripted_worker_set(ex.env_id, env::ActionSpace::kDiscrete);
    CHECK_NOTHROW(
        options::validate_worker_coverage(options::rule_head_options(p), set));
  }
  CHECK_THROWS_AS(options::scripted_worker_set("pong", env::ActionSpace::kDiscrete),
                  std::invalid_argument);
}
