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
#include <vector>

#include "envs_internal.hpp"

namespace hyrl::env {
namespace {

// Barrels spawn on the top platform and zigzag down, cutting the corner at
// each platform end into a two-row fall. Jumping one pays +1, a hammer hit
// +5, the princess +200; touching a barrel on the ground ends the episode.
constexpr int kFloorRows[4] = {11, 8, 5, 2};
constexpr int kClimbTicks = 6;
constexpr int kTimer = 160;
constexpr int kShortTimer = 60;
constexpr int kGoalX = 9, kGoalY = 2;
constexpr int kHammerX = 5, kHammerY = 8;
constexpr int kHammerTicks = 40;
constexpr int kSpawnPeriod = 8;
constexpr int kNearSpawnPeriod = 6;
constexpr int kCloseBy = 2;

struct Ladder {
  int x, top, bottom;
};
constexpr Ladder kLadders[3] = {{0, 8, 11}, {11, 5, 8}, {0, 2, 5}};

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

struct Barrel {
  int x, y, dir;
  bool falling;
};

class MiniDonkeyKong final : public Env {
 public:
  explicit MiniDonkeyKong(const EnvConfig& cfg) : Env(cfg) {
    init_signature({"nothing_around(player)", "close_by_barrel(player,barrel)",
                    "holding_hammer(player)", "hammer_on_level(player,hammer)"});
  }

 protected:
  void do_reset(util::Rng& rng) override {
    px_ = 6;
    py_ = 11;
    if (has_mod("random_start")) {
      px_ = static_cast<int>(rng.randint(kGrid));
    }
    climb_ = 0;
    airborne_ = false;
    barrels_.clear();
    barrels_enabled_ = !has_mod("disable_enemies");
    near_spawn_ = has_mod("spawn_barrel_near_player");
    if (barrels_enabled_ && !near_spawn_) barrels_.push_back({1, 2, 1, false});
    spawn_clock_ = 0;
    hammer_present_ = !has_mod("no_hammer");
    hammer_used_ = false;
    holding_ = false;
    hammer_left_ = 0;
    timer_max_ = has_mod("shorten_timelimit") ? kShortTimer : kTimer;
    timer_ = timer_max_;
    visited_ = 1;
    jumped_ = 0;
    hits_ = 0;
    goal_ = false;
  }

  double do_step(int action) override {
    double reward = 0.0;
    airborne_ = false;
    const int old_px = px_, old_py = py_;
    switch (action) {
      case kLeft:
      case kRight: {
        if (is_floor_row(py_)) {
          px_ += action == kLeft ? -1 : 1;
          px_ = std::clamp(px_, 0, kGrid - 1);
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
        } else if (is_floor_row(py_)) {
          airborne_ = true;  // jump in place for this tick
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
        if (holding_) {
          for (auto it = barrels_.begin(); it != barrels_.end();) {
            if (cheby(px_, py_, it->x, it->y) <= 1) {
              it = barrels_.erase(it);
              reward += 5.0;
              ++hits_;
            } else {
              ++it;
            }
          }
        }
        break;
      }
      default: break;
    }

    if (hammer_present_ && !hammer_used_ && px_ == kHammerX && py_ == kHammerY) {
      hammer_present_ = false;
      hammer_used_ = true;
      holding_ = true;
      hammer_left_ = kHammerTicks;
    }

    // Barrels move after the player; a same-cell meeting or a cell swap is a
    // hit. Airborne hits score instead of killing and the barrel rolls on.
    bool dead = false;
    for (auto it = barrels_.begin(); it != barrels_.end();) {
      const int bx = it->x, by = it->y;
      bool despawned = !advance(*it);
      bool hit = false;
      if (!despawned) {
        hit = (it->x == px_ && it->y == py_) ||
              (bx == px_ && by == py_ && it->x == old_px && it->y == old_py);
      }
      if (hit) {
        if (airborne_) {
          reward += 1.0;
          ++jumped_;
        } else {
          dead = true;
        }
      }
      it = despawned ? barrels_.erase(it) : std::next(it);
    }
    if (dead) {
      set_done();
      return reward;
    }

    if (barrels_enabled_ && ++spawn_clock_ >= (near_spawn_ ? kNearSpawnPeriod : kSpawnPeriod)) {
      spawn_clock_ = 0;
      if (near_spawn_) {
        if (is_floor_row(py_)) {
          int sx = std::min(px_ + 3, kGrid - 1);
          if (sx != px_) barrels_.push_back({sx, py_, -1, false});
        }
      } else {
        barrels_.push_back({1, 2, 1, false});
      }
    }

    if (holding_ && --hammer_left_ <= 0) holding_ = false;

    if (px_ == kGoalX && py_ == kGoalY && !goal_) {
      goal_ = true;
      reward += 200.0;
      set_done();
      return reward;
    }
    int fi = floor_index(py_);
    if (fi >= 0 && !(visited_ & (1 << fi))) {
      visited_ |= 1 << fi;
      if (has_mod("platform_checkpoints")) reward += 20.0;
    }
    if (--timer_ <= 0) set_done();
    return reward;
  }

  int num_planes() const override { return 6; }

  void fill_planes(std::vector<double>& f) const override {
    for (int x = 0; x < kGrid; ++x)
      for (int r : kFloorRows) mark(f, 0, x, r);
    for (const Ladder& l : kLadders)
      for (int y = l.top + 1; y < l.bottom; ++y) mark(f, 0, l.x, y);
    mark(f, 1, px_, py_);
    for (const Barrel& b : barrels_) mark(f, 2, b.x, b.y);
    if (hammer_present_) mark(f, 3, kHammerX, kHammerY);
    if (!goal_) mark(f, 4, kGoalX, kGoalY);
    mark_gauge(f, 5, timer_, timer_max_);
  }

  void fill_facts(std::vector<uint8_t>& t) const override {
    bool close = false;
    for (const Barrel& b : barrels_) close |= cheby(px_, py_, b.x, b.y) <= kCloseBy;
    t[0] = close ? 0 : 1;                                   // nothing_around
    t[1] = close ? 1 : 0;                                   // close_by_barrel
    t[2] = holding_ ? 1 : 0;                                // holding_hammer
    t[3] = hammer_present_ && py_ == kHammerY ? 1 : 0;      // hammer_on_level
  }

  void fill_info(std::map<std::string, double>& info) const override {
    int floors = 0;
    for (int i = 0; i < 4; ++i) floors += (visited_ >> i) & 1;
    info["floor_reached"] = floors - 1;
    info["barrels_jumped"] = jumped_;
    info["hammer_hits"] = hits_;
    info["goal"] = goal_ ? 1.0 : 0.0;
    info["timer"] = timer_;
  }

 private:
  bool can_climb(int dir) const {
    for (const Ladder& l : kLadders) {
      if (px_ != l.x) continue;
      if (dir < 0 && py_ > l.top && py_ <= l.bottom) return true;
      if (dir > 0 && py_ >= l.top && py_ < l.bottom) return true;
    }
    return false;
  }

  // One barrel tick. Returns false when the barrel leaves the board.
  static bool advance(Barrel& b) {
    if (b.falling) {
      ++b.y;
      if (is_floor_row(b.y)) {
        b.falling = false;
        b.dir = -b.dir;
      }
      return true;
    }
    int nx = b.x + b.dir;
    if (nx < 0 || nx > kGrid - 1) return false;  // rolled off the bottom row
    if (nx == 0 || nx == kGrid - 1) {
      if (b.y == 11) return false;  // bottom floor: no further fall
      b.x = nx;
      ++b.y;
      b.falling = true;
      return true;
    }
    b.x = nx;
    return true;
  }

  int px_ = 6, py_ = 11;
  int climb_ = 0;
  bool airborne_ = false;
  std::vector<Barrel> barrels_;
  bool barrels_enabled_ = true;
  bool near_spawn_ = false;
  int spawn_clock_ = 0;
  bool hammer_present_ = true;
  bool hammer_used_ = false;
  bool holding_ = false;
  int hammer_left_ = 0;
  int timer_ = kTimer;
  int timer_max_ = kTimer;
  int visited_ = 1;
  int jumped_ = 0;
  int hits_ = 0;
  bool goal_ = false;
};

}  // namespace

std::unique_ptr<Env> make_minidonkeykong(const EnvConfig& cfg) {
  return std::make_unique<MiniDonkeyKong>(cfg);
}

}  // namespace hyrl::env
