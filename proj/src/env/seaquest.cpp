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

#include "envs_internal.hpp"

namespace hyrl::env {
namespace {

// Underwater rescue: divers pay +10 each but only when surfaced, shooting a
// respawning enemy pays +1 immediately. Oxygen drains below the surface and
// refills on it, so long dives must be budgeted.
constexpr int kOxygenMax = 64;
constexpr int kOxygenLow = 16;  // strictly below this is "low" (25% of max)
constexpr int kMaxCarried = 3;
constexpr int kTimer = 200;
constexpr int kShortTimer = 80;
constexpr int kCloseBy = 2;

constexpr int kDiverHomes[3][2] = {{1, 9}, {8, 9}, {11, 3}};
constexpr int kEnemyHomes[3][2] = {{2, 3}, {9, 5}, {4, 7}};

class MiniSeaquest final : public Env {
 public:
  explicit MiniSeaquest(const EnvConfig& cfg) : Env(cfg) {
    init_signature({"oxygen_low(player)", "full_divers(player)",
                    "close_by_enemy(player,enemy)"});
  }

 protected:
  void do_reset(util::Rng& rng) override {
    px_ = 6;
    py_ = 0;
    if (has_mod("random_start")) px_ = static_cast<int>(rng.randint(kGrid));
    oxygen_ = kOxygenMax;
    unlimited_oxygen_ = has_mod("unlimited_oxygen");
    enemies_enabled_ = !has_mod("disable_enemies");
    for (int e = 0; e < 3; ++e) {
      alive_[e] = enemies_enabled_;
      respawn_[e] = 0;
    }
    for (int d = 0; d < 3; ++d) present_[d] = true;
    carried_ = 0;
    delivered_ = 0;
    shot_ = 0;
    timer_max_ = has_mod("shorten_timelimit") ? kShortTimer : kTimer;
    timer_ = timer_max_;
  }

  double do_step(int action) override {
    double reward = 0.0;
    switch (action) {
      case kLeft: px_ = px_ > 0 ? px_ - 1 : 0; break;
      case kRight: px_ = px_ < kGrid - 1 ? px_ + 1 : px_; break;
      case kUp: py_ = py_ > 0 ? py_ - 1 : 0; break;
      case kDown: py_ = py_ < kGrid - 1 ? py_ + 1 : py_; break;
      case kAct: {
        for (int e = 0; e < 3; ++e) {
          if (alive_[e] && cheby(px_, py_, kEnemyHomes[e][0], kEnemyHomes[e][1]) <= 1) {
            alive_[e] = false;
            respawn_[e] = 1;
            reward += 1.0;
            ++shot_;
          }
        }
        break;
      }
      default: break;
    }

    for (int e = 0; e < 3; ++e) {
      if (!enemies_enabled_ || alive_[e]) continue;
      if (respawn_[e] > 0) {
        --respawn_[e];
      } else if (px_ != kEnemyHomes[e][0] || py_ != kEnemyHomes[e][1]) {
        alive_[e] = true;
      }
    }
    for (int e = 0; e < 3; ++e) {
      if (alive_[e] && px_ == kEnemyHomes[e][0] && py_ == kEnemyHomes[e][1]) {
        set_done();  // swam into a live enemy
        return reward;
      }
    }

    for (int d = 0; d < 3; ++d) {
      if (present_[d] && carried_ < kMaxCarried && px_ == kDiverHomes[d][0] &&
          py_ == kDiverHomes[d][1]) {
        present_[d] = false;
        ++carried_;
      }
    }

    if (py_ == 0) {
      if (carried_ > 0) {
        reward += 10.0 * carried_;
        delivered_ += carried_;
        carried_ = 0;
      }
      oxygen_ = kOxygenMax;
    } else if (!unlimited_oxygen_) {
      if (--oxygen_ <= 0) {
        set_done();  // drowned
        return reward;
      }
    }
    if (--timer_ <= 0) set_done();
    return reward;
  }

  int num_planes() const override { return 5; }

  void fill_planes(std::vector<double>& f) const override {
    for (int x = 0; x < kGrid; ++x) mark(f, 0, x, 0);
    mark(f, 1, px_, py_);
    for (int e = 0; e < 3; ++e)
      if (alive_[e]) mark(f, 2, kEnemyHomes[e][0], kEnemyHomes[e][1]);
    for (int d = 0; d < 3; ++d)
      if (present_[d]) mark(f, 3, kDiverHomes[d][0], kDiverHomes[d][1]);
    mark_gauge(f, 4, oxygen_, kOxygenMax);
  }

  void fill_facts(std::vector<uint8_t>& t) const override {
    bool close = false;
    for (int e = 0; e < 3; ++e) {
      close |= alive_[e] &&
               cheby(px_, py_, kEnemyHomes[e][0], kEnemyHomes[e][1]) <= kCloseBy;
    }
    t[0] = oxygen_ < kOxygenLow ? 1 : 0;      // oxygen_low(player)
    t[1] = carried_ == kMaxCarried ? 1 : 0;   // full_divers(player)
    t[2] = close ? 1 : 0;                     // close_by_enemy(player,enemy)
  }

  void fill_info(std::map<std::string, double>& info) const override {
    info["oxygen"] = oxygen_;
    info["divers"] = carried_;
    info["delivered"] = delivered_;
    info["enemies_shot"] = shot_;
    info["timer"] = timer_;
  }

 private:
  int px_ = 6, py_ = 0;
  int oxygen_ = kOxygenMax;
  bool unlimited_oxygen_ = false;
  bool enemies_enabled_ = true;
  bool alive_[3] = {false, false, false};
  int respawn_[3] = {0, 0, 0};
  bool present_[3] = {true, true, true};
  int carried_ = 0;
  int delivered_ = 0;
  int shot_ = 0;
  int timer_ = kTimer;
  int timer_max_ = kTimer;
};

}  // namespace

std::unique_ptr<Env> make_miniseaquest(const EnvConfig& cfg) {
  return std::make_unique<MiniSeaquest>(cfg);
}

}  // namespace hyrl::env
