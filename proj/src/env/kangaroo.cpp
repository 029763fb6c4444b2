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

// Four platforms connected by slow ladders; monkeys camp the lowest floor
// next to the start, the joey waits on the top one. Punching a monkey pays
// +1 and it respawns two steps later, so farming punches beats climbing over
// any 50-step window while the episode optimum still requires the ascent.
constexpr int kFloorRows[4] = {11, 8, 5, 2};
constexpr int kClimbTicks = 6;  // UP/DOWN actions per row of ladder
constexpr int kTimer = 160;
constexpr int kShortTimer = 60;
constexpr int kJoeyX = 2, kJoeyY = 2;
constexpr int kCloseBy = 2;  // Chebyshev radius for symbolic proximity

struct Ladder {
  int x, top, bottom;
};
constexpr Ladder kLadders[3] = {{11, 8, 11}, {0, 5, 8}, {11, 2, 5}};

constexpr int kMonkeyHomes[2][2] = {{1, 11}, {3, 11}};

bool is_floor_row(int y) {
  for (int r : kFloorRows)
    if (y == r) return true;
  return false;
}

int floor_index(int y) {
  for (int i = 0; i < 4; ++i)
    if (kFloorRows[i] == y) return i;
  return -1;
}

class MiniKangaroo final : public Env {
 public:
  explicit MiniKangaroo(const EnvConfig& cfg) : Env(cfg) {
    init_signature({"nothing_around(player)", "on_ladder(player,ladder)",
                    "close_by_monkey(player,monkey)"});
  }

 protected:
  void do_reset(util::Rng& rng) override {
    px_ = 6;
    py_ = 11;
    if (has_mod("random_start")) {
      // Any column on the bottom floor that is not a monkey home.
      static constexpr int kStarts[10] = {0, 2, 4, 5, 6, 7, 8, 9, 10, 11};
      px_ = kStarts[rng.randint(10)];
    }
    climb_ = 0;
    monkeys_enabled_ = !has_mod("disable_enemies");
    for (int m = 0; m < 2; ++m) {
      alive_[m] = monkeys_enabled_;
      respawn_[m] = 0;
    }
    timer_max_ = has_mod("shorten_timelimit") ? kShortTimer : kTimer;
    timer_ = timer_max_;
    visited_ = 1;  // the starting floor
    punched_ = 0;
    joey_ = false;
  }

  double do_step(int action) override {
    double reward = 0.0;
    switch (action) {
      case kLeft:
      case kRight: {
        if (is_floor_row(py_)) {
          px_ += action == kLeft ? -1 : 1;
          px_ = px_ < 0 ? 0 : (px_ > kGrid - 1 ? kGrid - 1 : px_);
          climb_ = 0;
        }
        break;
      }
      case kUp: {
        if (can_climb(-1)) {
          if (++climb_ >= kClimbTicks) {
            --py_;
            climb_ = 0;
          }
        }
        break;
      }
      case kDown: {
        if (can_climb(+1)) {
          if (++climb_ >= kClimbTicks) {
            ++py_;
            climb_ = 0;
          }
        }
        break;
      }
      case kAct: {
        for (int m = 0; m < 2; ++m) {
          if (alive_[m] && cheby(px_, py_, kMonkeyHomes[m][0], kMonkeyHomes[m][1]) <= 1) {
            alive_[m] = false;
            respawn_[m] = 1;
            reward += 1.0;
            ++punched_;
          }
        }
        break;
      }
      default: break;
    }

    // Respawn bookkeeping: killed at t, absent during t+1, back at t+2
    // unless the player squats the home cell.
    for (int m = 0; m < 2; ++m) {
      if (!monkeys_enabled_ || alive_[m]) continue;
      if (respawn_[m] > 0) {
        --respawn_[m];
      } else if (px_ != kMonkeyHomes[m][0] || py_ != kMonkeyHomes[m][1]) {
        alive_[m] = true;
      }
    }
    for (int m = 0; m < 2; ++m) {
      if (alive_[m] && px_ == kMonkeyHomes[m][0] && py_ == kMonkeyHomes[m][1]) {
        set_done();  // touched a live monkey
        return reward;
      }
    }

    int fi = floor_index(py_);
    if (fi >= 0 && !(visited_ & (1 << fi))) {
      visited_ |= 1 << fi;
      reward += 25.0;
      if (has_mod("platform_checkpoints")) reward += 20.0;
    }
    if (px_ == kJoeyX && py_ == kJoeyY && !joey_) {
      joey_ = true;
      reward += 200.0;
      set_done();
      return reward;
    }
    if (--timer_ <= 0) set_done();
    return reward;
  }

  int num_planes() const override { return 5; }

  void fill_planes(std::vector<double>& f) const override {
    for (int x = 0; x < kGrid; ++x)
      for (int r : kFloorRows) mark(f, 0, x, r);
    for (const Ladder& l : kLadders)
      for (int y = l.top + 1; y < l.bottom; ++y) mark(f, 0, l.x, y);
    mark(f, 1, px_, py_);
    for (int m = 0; m < 2; ++m)
      if (alive_[m]) mark(f, 2, kMonkeyHomes[m][0], kMonkeyHomes[m][1]);
    if (!joey_) mark(f, 3, kJoeyX, kJoeyY);
    mark_gauge(f, 4, timer_, timer_max_);
  }

  void fill_facts(std::vector<uint8_t>& t) const override {
    bool close = false;
    for (int m = 0; m < 2; ++m) {
      close |= alive_[m] &&
               cheby(px_, py_, kMonkeyHomes[m][0], kMonkeyHomes[m][1]) <= kCloseBy;
    }
    t[0] = close ? 0 : 1;                          // nothing_around(player)
    t[1] = can_climb(-1) || can_climb(+1) ? 1 : 0; // on_ladder(player,ladder)
    t[2] = close ? 1 : 0;                          // close_by_monkey(player,monkey)
  }

  void fill_info(std::map<std::string, double>& info) const override {
    int floors = 0;
    for (int i = 0; i < 4; ++i) floors += (visited_ >> i) & 1;
    info["floor_reached"] = floors - 1;
    info["monkeys_punched"] = punched_;
    info["joey"] = joey_ ? 1.0 : 0.0;
    info["timer"] = timer_;
  }

 private:
  // dir -1 climbs up, +1 climbs down.
  bool can_climb(int dir) const {
    for (const Ladder& l : kLadders) {
      if (px_ != l.x) continue;
      if (dir < 0 && py_ > l.top && py_ <= l.bottom) return true;
      if (dir > 0 && py_ >= l.top && py_ < l.bottom) return true;
    }
    return false;
  }

  int px_ = 6, py_ = 11;
  int climb_ = 0;
  bool monkeys_enabled_ = true;
  bool alive_[2] = {false, false};
  int respawn_[2] = {0, 0};
  int timer_ = kTimer;
  int timer_max_ = kTimer;
  int visited_ = 1;
  int punched_ = 0;
  bool joey_ = false;
};

}  // namespace

std::unique_ptr<Env> make_minikangaroo(const EnvConfig& cfg) {
  return std::make_unique<MiniKangaroo>(cfg);
}

}  // namespace hyrl::env
