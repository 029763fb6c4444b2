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
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "hyrl/env/env.hpp"
#include "hyrl/util/counters.hpp"
#include "hyrl/util/rng.hpp"
#include "json.hpp"

using namespace hyrl;
using namespace hyrl::env;

namespace {

EnvConfig cfg_for(const std::string& id, std::vector<std::string> mods = {},
                  uint64_t seed = 7) {
  EnvConfig c;
  c.env_id = id;
  c.modifications = std::move(mods);
  c.seed = seed;
  return c;
}

double fact(Env& e, const std::string& atom) {
  for (const auto& [a, v] : e.symbolic_facts())
    if (a == atom) return v;
  FAIL("atom not in signature: ", atom);
  return -1.0;
}

// Scripted MiniKangaroo ascent: three ladders, then walk to the joey.
std::vector<int> ascent_actions() {
  std::vector<int> a;
  auto rep = [&](int act, int n) { a.insert(a.end(), n, act); };
  rep(kRight, 5);
  rep(kUp, 18);
  rep(kLeft, 11);
  rep(kUp, 18);
  rep(kRight, 11);
  rep(kUp, 18);
  rep(kLeft, 9);
  return a;
}

}  // namespace

TEST_CASE("identical config and seed give bit-identical rollouts") {
  for (const std::string id : {"minikangaroo", "miniseaquest", "minidonkeykong"}) {
    auto a = make_env(cfg_for(id));
    auto b = make_env(cfg_for(id));
    ObsPair oa = a->reset(42), ob = b->reset(42);
    REQUIRE(oa.x.size() == ob.x.size());
    util::Rng rng(99);
    for (int t = 0; t < 200 && !a->done(); ++t) {
      int act = static_cast<int>(rng.randint(kNumActions));
      StepResult ra = a->step(act), rb = b->step(act);
      CHECK(ra.reward == rb.reward);
      CHECK(ra.done == rb.done);
      CHECK(ra.info == rb.info);
      for (int64_t i = 0; i < ra.obs.x.size(); ++i)
        CHECK(ra.obs.x.at(i) == rb.obs.x.at(i));
      if (ra.done) break;
    }
  }
}

TEST_CASE("punch farming beats any 50-step ascent but loses the episode") {
  // Myopic loop: knock out the near monkey, slip between the two homes
  // while it is down, then punch both forever.
  auto punch_return = [](int horizon) {
    auto e = make_env(cfg_for("minikangaroo"));
    e->reset(1);
    static constexpr int kOpening[5] = {kLeft, kLeft, kAct, kLeft, kLeft};
    double total = 0.0;
    for (int t = 0; t < horizon && !e->done(); ++t) {
      int act = t < 5 ? kOpening[t] : kAct;
      total += e->step(act).reward;
    }
    return total;
  };
  auto ascent_return = [](int horizon) {
    auto e = make_env(cfg_for("minikangaroo"));
    e->reset(1);
    auto plan = ascent_actions();
    double total = 0.0;
    for (int t = 0; t < horizon && !e->done(); ++t) {
      int act = t < static_cast<int>(plan.size()) ? plan[t] : kNoop;
      total += e->step(act).reward;
    }
    return total;
  };

  double punch50 = punch_return(50);
  double ascent50 = ascent_return(50);
  CHECK(punch50 > ascent50);
  CHECK(punch50 >= 40.0);
  CHECK(ascent50 == 25.0);  // one new floor is all a 50-step ascent can buy

  double punch_full = punch_return(100000);
  double ascent_full = ascent_return(100000);
  CHECK(ascent_full >= 25.0 * 3 + 200.0);
  CHECK(ascent_full > punch_full);
}

TEST_CASE("ascent reaches the joey and ends the episode") {
  auto e = make_env(cfg_for("minikangaroo"));
  e->reset(3);
  double total = 0.0;
  StepResult last;
  for (int act : ascent_actions()) {
    REQUIRE_FALSE(e->done());
    last = e->step(act);
    total += last.reward;
  }
  CHECK(e->done());
  CHECK(last.info.at("joey") == 1.0);
  CHECK(last.info.at("floor_reached") == 3.0);
  CHECK(total == 275.0);
}

TEST_CASE("floor_reached counts distinct floors and never decreases") {
  auto e = make_env(cfg_for("minikangaroo"));
  e->reset(5);
  auto plan = ascent_actions();
  double prev = 0.0;
  std::vector<double> seen;
  for (size_t t = 0; t + 9 < plan.size(); ++t) {  // stop before the joey
    StepResult r = e->step(plan[t]);
    double fr = r.info.at("floor_reached");
    CHECK(fr >= prev);
    if (seen.empty() || seen.back() != fr) seen.push_back(fr);
    prev = fr;
  }
  CHECK(seen == std::vector<double>{0.0, 1.0, 2.0, 3.0});

  // Climbing back down must not lower the count.
  for (int i = 0; i < 18 && !e->done(); ++i) {
    CHECK(e->step(kDown).info.at("floor_reached") == 3.0);
  }
}

TEST_CASE("exactly one of each p/not_p pair holds in every reached state") {
  for (const std::string id : {"minikangaroo", "miniseaquest", "minidonkeykong"}) {
    auto e = make_env(cfg_for(id));
    e->reset(11);
    const auto& sig = e->fact_signature();
    REQUIRE(sig.size() % 2 == 0);
    util::Rng rng(123);
    for (int t = 0; t < 150 && !e->done(); ++t) {
      const auto& facts = e->symbolic_facts();
      REQUIRE(facts.size() == sig.size());
      for (size_t i = 0; i < facts.size(); i += 2) {
        CHECK(facts[i].first == sig[i]);
        CHECK(facts[i + 1].first == "not_" + sig[i]);
        CHECK(facts[i].second + facts[i + 1].second == 1);
      }
      e->step(static_cast<int>(rng.randint(kNumActions)));
    }
  }
}

TEST_CASE("fact extraction is cached per state and counted") {
  auto e = make_env(cfg_for("minikangaroo"));
  e->reset(2);
  auto before = util::snapshot_counters().symbolic_fact_extractions;
  e->symbolic_facts();
  e->symbolic_facts();
  e->symbolic_facts();
  auto mid = util::snapshot_counters().symbolic_fact_extractions;
  CHECK(mid == before + 1);
  e->step(kNoop);
  e->symbolic_facts();
  CHECK(util::snapshot_counters().symbolic_fact_extractions == before + 2);
  // Stepping without asking for facts must not extract.
  e->step(kNoop);
  e->step(kNoop);
  CHECK(util::snapshot_counters().symbolic_fact_extractions == before + 2);
}

TEST_CASE("kangaroo facts track monkeys and ladders") {
  auto e = make_env(cfg_for("minikangaroo"));
  e->reset(4);
  // Start (6,11): monkeys at x=1,3 are 3+ away, not on a ladder.
  CHECK(fact(*e, "nothing_around(player)") == 1.0);
  CHECK(fact(*e, "close_by_monkey(player,monkey)") == 0.0);
  CHECK(fact(*e, "on_ladder(player,ladder)") == 0.0);
  e->step(kLeft);  // (5,11): Chebyshev 2 from the monkey at x=3
  CHECK(fact(*e, "close_by_monkey(player,monkey)") == 1.0);
  CHECK(fact(*e, "nothing_around(player)") == 0.0);
  for (int i = 0; i < 6; ++i) e->step(kRight);  // (11,11): ladder base
  CHECK(fact(*e, "on_ladder(player,ladder)") == 1.0);
  for (int i = 0; i < 6; ++i) e->step(kUp);  // (11,10): on the ladder
  CHECK(fact(*e, "on_ladder(player,ladder)") == 1.0);
}

TEST_CASE("continuous (0,0) steps equal discrete NOOP steps") {
  CHECK(map_continuous(0.0, 0.0) == kNoop);
  CHECK(map_continuous(0.3, 0.0) == kNoop);  // threshold is strict
  CHECK(map_continuous(0.5, 0.0) == kRight);
  CHECK(map_continuous(-0.5, 0.0) == kLeft);
  CHECK(map_continuous(0.0, 0.5) == kUp);
  CHECK(map_continuous(0.0, -0.5) == kDown);
  CHECK(map_continuous(0.7, -0.9) == kAct);
  for (int a = 0; a < kNumActions; ++a) {
    auto [ax, ay] = inverse_map(a);
    CHECK(map_continuous(ax, ay) == a);
  }

  EnvConfig cc = cfg_for("minikangaroo");
  cc.action_space = ActionSpace::kContinuous;
  auto c = make_env(cc);
  auto d = make_env(cfg_for("minikangaroo"));
  c->reset(9);
  d->reset(9);
  for (int t = 0; t < 25; ++t) {
    StepResult rc = c->step(0.0, 0.0);
    StepResult rd = d->step(kNoop);
    CHECK(rc.reward == rd.reward);
    for (int64_t i = 0; i < rc.obs.x.size(); ++i)
      CHECK(rc.obs.x.at(i) == rd.obs.x.at(i));
  }
}

TEST_CASE("observations stack the two most recent frames") {
  auto e = make_env(cfg_for("minikangaroo"));
  ObsPair o0 = e->reset(6);
  REQUIRE(o0.x.size() == e->obs_dim());
  REQUIRE(e->obs_dim() == 2 * 5 * 12 * 12);
  int64_t half = e->obs_dim() / 2;
  for (int64_t i = 0; i < half; ++i) CHECK(o0.x.at(i) == o0.x.at(half + i));
  for (int64_t i = 0; i < o0.x.size(); ++i) {
    CHECK(std::isfinite(o0.x.at(i)));
    CHECK((o0.x.at(i) == 0.0 || o0.x.at(i) == 1.0));
  }
  StepResult r1 = e->step(kRight);
  // prev half of the new obs is the current half of the old one
  for (int64_t i = 0; i < half; ++i) CHECK(r1.obs.x.at(i) == o0.x.at(half + i));
  // the player plane moved, so the halves now differ somewhere
  bool differs = false;
  for (int64_t i = 0; i < half; ++i)
    differs |= r1.obs.x.at(i) != r1.obs.x.at(half + i);
  CHECK(differs);
  // z is only filled on request
  CHECK(o0.z.empty());
  CHECK(r1.obs.z.empty());
}

TEST_CASE("modifications change the advertised mechanics") {
  SUBCASE("disable_enemies removes all monkeys") {
    auto e = make_env(cfg_for("minikangaroo", {"disable_enemies"}));
    e->reset(8);
    util::Rng rng(5);
    for (int t = 0; t < 150 && !e->done(); ++t) {
      CHECK(fact(*e, "close_by_monkey(player,monkey)") == 0.0);
      StepResult r = e->step(static_cast<int>(rng.randint(kNumActions)));
      CHECK(r.info.at("monkeys_punched") == 0.0);
    }
  }
  SUBCASE("unlimited_oxygen keeps the gauge constant underwater") {
    auto e = make_env(cfg_for("miniseaquest", {"unlimited_oxygen"}));
    e->reset(8);
    e->step(kDown);
    for (int t = 0; t < 100; ++t) {
      StepResult r = e->step(kNoop);
      CHECK(r.info.at("oxygen") == 64.0);
      CHECK_FALSE(r.done);
    }
  }
  SUBCASE("shorten_timelimit ends the episode early") {
    auto e = make_env(cfg_for("minikangaroo", {"shorten_timelimit"}));
    e->reset(8);
    int t = 0;
    while (!e->done()) {
      e->step(kNoop);
      ++t;
    }
    CHECK(t == 60);
  }
  SUBCASE("duplicate tags are idempotent") {
    auto c1 = apply_modification(cfg_for("minikangaroo"), "disable_enemies");
    auto c2 = apply_modification(c1, "disable_enemies");
    CHECK(c2.modifications == std::vector<std::string>{"disable_enemies"});
    auto a = make_env(c1);
    auto b = make_env(cfg_for("minikangaroo",
                              {"disable_enemies", "disable_enemies"}));
    ObsPair oa = a->reset(3), ob = b->reset(3);
    for (int64_t i = 0; i < oa.x.size(); ++i) CHECK(oa.x.at(i) == ob.x.at(i));
  }
  SUBCASE("random_start varies the initial position with the seed") {
    auto e = make_env(cfg_for("minikangaroo", {"random_start"}));
    ObsPair o1 = e->reset(101);
    ObsPair o2 = e->reset(105);
    bool differs = false;
    for (int64_t i = 0; i < o1.x.size(); ++i) differs |= o1.x.at(i) != o2.x.at(i);
    CHECK(differs);
    // and the same seed restores the same position
    ObsPair o3 = e->reset(101);
    for (int64_t i = 0; i < o1.x.size(); ++i) CHECK(o1.x.at(i) == o3.x.at(i));
  }
  SUBCASE("platform_checkpoints add shaping on new floors") {
    auto e = make_env(cfg_for("minikangaroo", {"platform_checkpoints"}));
    e->reset(3);
    double total = 0.0;
    for (int act : ascent_actions()) total += e->step(act).reward;
    CHECK(total == 275.0 + 3 * 20.0);
  }
}

TEST_CASE("seaquest: divers pay only when surfaced and oxygen drains") {
  auto e = make_env(cfg_for("miniseaquest"));
  e->reset(12);
  double total = 0.0;
  StepResult r;
  auto run = [&](int act, int n) {
    for (int i = 0; i < n; ++i) {
      r = e->step(act);
      total += r.reward;
    }
  };
  run(kRight, 2);
  run(kDown, 9);  // onto the diver at (8,9)
  CHECK(r.info.at("divers") == 1.0);
  CHECK(r.info.at("delivered") == 0.0);
  CHECK(total == 0.0);
  CHECK(r.info.at("oxygen") == 64.0 - 9.0);
  run(kUp, 9);  // surface
  CHECK(total == 10.0);
  CHECK(r.info.at("divers") == 0.0);
  CHECK(r.info.at("delivered") == 1.0);
  CHECK(r.info.at("oxygen") == 64.0);  // refilled
}

TEST_CASE("seaquest: oxygen_low trips below a quarter tank and 0 kills") {
  auto e = make_env(cfg_for("miniseaquest"));
  e->reset(12);
  e->step(kDown);
  CHECK(fact(*e, "oxygen_low(player)") == 0.0);
  int steps = 1;
  while (!e->done()) {
    StepResult r = e->step(kNoop);
    ++steps;
    double oxy = r.info.at("oxygen");
    CHECK(fact(*e, "oxygen_low(player)") == (oxy < 16.0 ? 1.0 : 0.0));
    if (r.done) CHECK(oxy == 0.0);
  }
  CHECK(steps == 64);  // one unit per underwater step
}

TEST_CASE("seaquest: full_divers and shooting") {
  auto e = make_env(cfg_for("miniseaquest", {"unlimited_oxygen"}));
  e->reset(12);
  auto run = [&](int act, int n) {
    for (int i = 0; i < n; ++i) e->step(act);
  };
  // Collect all three divers: (8,9), (1,9), (11,3).
  run(kRight, 2);
  run(kDown, 9);
  run(kLeft, 7);
  CHECK(fact(*e, "full_divers(player)") == 0.0);
  run(kRight, 10);
  run(kUp, 6);
  CHECK(fact(*e, "full_divers(player)") == 1.0);

  // Enemy at (9,5): approach to Chebyshev 1 and shoot.
  auto e2 = make_env(cfg_for("miniseaquest", {"unlimited_oxygen"}));
  e2->reset(12);
  for (int i = 0; i < 2; ++i) e2->step(kRight);  // (8,0)
  for (int i = 0; i < 4; ++i) e2->step(kDown);   // (8,4)
  CHECK(fact(*e2, "close_by_enemy(player,enemy)") == 1.0);
  StepResult r = e2->step(kAct);
  CHECK(r.reward == 1.0);
  CHECK(r.info.at("enemies_shot") == 1.0);
  // Respawned two steps later; a second volley connects again.
  e2->step(kNoop);
  r = e2->step(kAct);
  CHECK(r.reward == 1.0);
  CHECK(r.info.at("enemies_shot") == 2.0);
}

TEST_CASE("donkeykong: jumping a barrel scores instead of dying") {
  auto e = make_env(cfg_for("minidonkeykong", {"spawn_barrel_near_player"}));
  e->reset(15);
  // Spawner fires at t=6 three cells to the right; the barrel arrives at t=9.
  for (int t = 1; t <= 8; ++t) e->step(kNoop);
  CHECK(fact(*e, "close_by_barrel(player,barrel)") == 1.0);
  StepResult r = e->step(kUp);  // jump as it passes underneath
  CHECK(r.reward == 1.0);
  CHECK(r.info.at("barrels_jumped") == 1.0);
  CHECK_FALSE(r.done);

  // Same setup without the jump: the barrel hit ends the episode.
  auto e2 = make_env(cfg_for("minidonkeykong", {"spawn_barrel_near_player"}));
  e2->reset(15);
  for (int t = 1; t <= 8; ++t) e2->step(kNoop);
  r = e2->step(kNoop);
  CHECK(r.done);
  CHECK(r.reward == 0.0);
}

TEST_CASE("donkeykong: hammer pickup, fact, and hit") {
  auto e = make_env(cfg_for("minidonkeykong"));
  e->reset(16);
  auto run = [&](int act, int n) {
    for (int i = 0; i < n; ++i) {
      REQUIRE_FALSE(e->done());
      e->step(act);
    }
  };
  CHECK(fact(*e, "hammer_on_level(player,hammer)") == 0.0);
  run(kLeft, 6);
  run(kUp, 18);  // ladder at x=0 up to the hammer's floor
  CHECK(fact(*e, "hammer_on_level(player,hammer)") == 1.0);
  CHECK(fact(*e, "holding_hammer(player)") == 0.0);
  run(kRight, 5);  // onto the hammer at (5,8)
  CHECK(fact(*e, "holding_hammer(player)") == 1.0);
  CHECK(fact(*e, "hammer_on_level(player,hammer)") == 0.0);  // item consumed

  // Swing at every barrel that rolls into range.
  double hits = 0.0;
  for (int t = 0; t < 60 && !e->done() && hits < 1.0; ++t) {
    bool close = fact(*e, "close_by_barrel(player,barrel)") == 1.0;
    StepResult r = e->step(close ? kAct : kNoop);
    hits = r.info.at("hammer_hits");
    if (hits >= 1.0) CHECK(r.reward >= 5.0);
  }
  CHECK(hits >= 1.0);
}

TEST_CASE("donkeykong: no_hammer removes the item") {
  auto e = make_env(cfg_for("minidonkeykong", {"no_hammer", "disable_enemies"}));
  e->reset(16);
  auto run = [&](int act, int n) {
    for (int i = 0; i < n; ++i) e->step(act);
  };
  run(kLeft, 6);
  run(kUp, 18);
  CHECK(fact(*e, "hammer_on_level(player,hammer)") == 0.0);
  run(kRight, 5);
  CHECK(fact(*e, "holding_hammer(player)") == 0.0);
}

TEST_CASE("donkeykong: the princess pays 200 and ends the episode") {
  auto e = make_env(cfg_for("minidonkeykong", {"disable_enemies"}));
  e->reset(16);
  std::vector<int> plan;
  auto rep = [&](int act, int n) { plan.insert(plan.end(), n, act); };
  rep(kLeft, 6);
  rep(kUp, 18);
  rep(kRight, 11);
  rep(kUp, 18);
  rep(kLeft, 11);
  rep(kUp, 18);
  rep(kRight, 9);
  double total = 0.0;
  StepResult last;
  for (int act : plan) {
    REQUIRE_FALSE(e->done());
    last = e->step(act);
    total += last.reward;
  }
  CHECK(e->done());
  CHECK(last.info.at("goal") == 1.0);
  CHECK(total == 200.0);
}

TEST_CASE("error paths") {
  auto e = make_env(cfg_for("minikangaroo"));
  CHECK_THROWS_AS(e->step(kNoop), std::logic_error);       // before reset
  CHECK_THROWS_AS(e->symbolic_facts(), std::logic_error);  // before reset
  e->reset(1);
  CHECK_THROWS_AS(e->step(-1), std::out_of_range);
  CHECK_THROWS_AS(e->step(kNumActions), std::out_of_range);
  CHECK_THROWS_AS(e->step(0.0, 0.0), std::logic_error);  // discrete env

  EnvConfig cc = cfg_for("minikangaroo");
  cc.action_space = ActionSpace::kContinuous;
  auto c = make_env(cc);
  c->reset(1);
  CHECK_THROWS_AS(c->step(kNoop), std::logic_error);  // continuous env
  CHECK_THROWS_AS(c->step(1.5, 0.0), std::out_of_range);

  CHECK_THROWS_AS(make_env(cfg_for("pong")), std::invalid_argument);
  CHECK_THROWS_AS(make_env(cfg_for("minikangaroo", {"unlimited_oxygen"})),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_modification(cfg_for("miniseaquest"), "no_hammer"),
                  std::invalid_argument);

  // step after done
  auto f = make_env(cfg_for("minikangaroo", {"shorten_timelimit"}));
  f->reset(1);
  while (!f->done()) f->step(kNoop);
  CHECK_THROWS_AS(f->step(kNoop), std::logic_error);
}

TEST_CASE("episode cap from max_steps") {
  EnvConfig c = cfg_for("minidonkeykong", {"disable_enemies"});
  c.max_steps = 17;
  auto e = make_env(c);
  e->reset(1);
  int t = 0;
  while (!e->done()) {
    e->step(kNoop);
    ++t;
  }
  CHECK(t == 17);
}

TEST_CASE("trace log records one JSON line per step with facts") {
  const std::string path = "build/trace_test.jsonl";
  std::remove(path.c_str());
  {
    EnvConfig c = cfg_for("minikangaroo");
    c.trace_path = path;
    auto e = make_env(c);
    e->reset(21);
    e->step(kLeft);
    e->step(kAct);
    e->step(kNoop);
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  int lines = 0, steps = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    ++lines;
    if (j.contains("reset")) {
      CHECK(j["seed"] == 21);
    } else {
      ++steps;
      CHECK(j.contains("action"));
      CHECK(j.contains("reward"));
      CHECK(j["facts"].contains("nothing_around(player)"));
      CHECK(j["facts"].contains("not_nothing_around(player)"));
    }
  }
  CHECK(lines == 4);
  CHECK(steps == 3);
  std::remove(path.c_str());
}
