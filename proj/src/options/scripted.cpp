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

#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>

#include "hyrl/options/worker.hpp"
#include "hyrl/util/digest.hpp"

namespace hyrl::options {
namespace {

using env::kAct;
using env::kDown;
using env::kGrid;
using env::kLeft;
using env::kNoop;
using env::kRight;
using env::kUp;

// Decoded view of the current frame (second half of the stacked obs).
struct Board {
  const double* cur;
  int planes;

  double at(int plane, int x, int y) const {
    return cur[(plane * kGrid + y) * kGrid + x];
  }
  std::pair<int, int> find_one(int plane) const {
    for (int y = 0; y < kGrid; ++y)
      for (int x = 0; x < kGrid; ++x)
        if (at(plane, x, y) == 1.0) return {x, y};
    return {-1, -1};
  }
  std::vector<std::pair<int, int>> find_all(int plane) const {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < kGrid; ++y)
      for (int x = 0; x < kGrid; ++x)
        if (at(plane, x, y) == 1.0) out.emplace_back(x, y);
    return out;
  }
};

int chebyd(int x0, int y0, int x1, int y1) {
  return std::max(std::abs(x0 - x1), std::abs(y0 - y1));
}

int toward_x(int px, int tx) { return tx < px ? kLeft : kRight; }

// Ladder column to use from each platform, bottom to top. Kangaroo and
// DonkeyKong alternate ends but on opposite sides.
int kangaroo_ladder_x(int row) { return row == 8 ? 0 : 11; }
int dk_ladder_x(int row) { return row == 8 ? 11 : 0; }

bool is_floor_row(int y) { return y == 11 || y == 8 || y == 5 || y == 2; }

// Generic platform ascent: walk to this platform's ladder, climb, and on the
// top platform head for the goal entity.
int climb_action(const Board& b, int goal_plane, int (*ladder_x)(int)) {
  auto [px, py] = b.find_one(1);
  if (px < 0) return kNoop;
  if (py == 2) {
    auto [gx, gy] = b.find_one(goal_plane);
    if (gx < 0 || gx == px) return kNoop;
    return toward_x(px, gx);
  }
  if (is_floor_row(py)) {
    int tx = ladder_x(py);
    if (px != tx) return toward_x(px, tx);
  }
  return kUp;
}

class ScriptedWorker final : public OptionWorker {
 public:
  ScriptedWorker(std::string id, env::ActionSpace space, int planes,
                 std::function<int(const Board&)> rule)
      : OptionWorker(std::move(id), space), planes_(planes), rule_(std::move(rule)) {}

  std::string kind() const override { return "scripted"; }

  std::vector<double> action_probs(const grad::Tensor& x) const override {
    int64_t expect = 2LL * planes_ * kGrid * kGrid;
    if (x.size() != expect) {
      throw std::invalid_argument("observation size " + std::to_string(x.size()) +
                                  " does not match worker input " + std::to_string(expect));
    }
    Board b{x.data() + planes_ * kGrid * kGrid, planes_};
    int a = rule_(b);
    std::vector<double> p(env::kNumActions, 0.0);
    p[static_cast<size_t>(a)] = 1.0;
    return p;
  }

  uint64_t param_digest() const override {
    return util::fnv1a("scripted:" + option_id());
  }

 private:
  int planes_;
  std::function<int(const Board&)> rule_;
};

// --- MiniKangaroo -----------------------------------------------------------

int rule_ascend(const Board& b) { return climb_action(b, 3, kangaroo_ladder_x); }

int rule_deal_with_enemy(const Board& b) {
  auto [px, py] = b.find_one(1);
  auto monkeys = b.find_all(2);
  if (px < 0 || monkeys.empty()) return kNoop;
  auto [mx, my] = monkeys[0];
  for (auto [cx, cy] : monkeys)
    if (chebyd(px, py, cx, cy) < chebyd(px, py, mx, my)) mx = cx, my = cy;
  if (chebyd(px, py, mx, my) <= 1) return kAct;
  if (py == my) return toward_x(px, mx);
  return kDown;  // monkeys live on the bottom floor
}

// --- MiniSeaquest -----------------------------------------------------------

int rule_surface(const Board& b) {
  auto [px, py] = b.find_one(1);
  (void)px;
  return py > 0 ? kUp : kNoop;
}

int rule_get_diver(const Board& b) {
  auto [px, py] = b.find_one(1);
  auto divers = b.find_all(3);
  if (px < 0) return kNoop;
  if (divers.empty()) return rule_surface(b);
  auto [dx, dy] = divers[0];
  for (auto [cx, cy] : divers) {
    if (std::abs(px - cx) + std::abs(py - cy) < std::abs(px - dx) + std::abs(py - dy))
      dx = cx, dy = cy;
  }
  if (px != dx) return toward_x(px, dx);
  if (py < dy) return kDown;
  if (py > dy) return kUp;
  return kNoop;
}

int rule_shoot_enemy(const Board& b) {
  auto [px, py] = b.find_one(1);
  auto enemies = b.find_all(2);
  if (px < 0 || enemies.empty()) return kNoop;
  auto [ex, ey] = enemies[0];
  for (auto [cx, cy] : enemies)
    if (chebyd(px, py, cx, cy) < chebyd(px, py, ex, ey)) ex = cx, ey = cy;
  if (chebyd(px, py, ex, ey) <= 1) return kAct;
  if (px != ex) return toward_x(px, ex);
  return py < ey ? kDown : kUp;
}

// --- MiniDonkeyKong ---------------------------------------------------------

int rule_climb(const Board& b) { return climb_action(b, 4, dk_ladder_x); }

int rule_jump_barrel(const Board& b) {
  auto [px, py] = b.find_one(1);
  if (px < 0) return kNoop;
  for (auto [bx, by] : b.find_all(2))
    if (by == py && std::abs(bx - px) == 1) return kUp;
  return kNoop;
}

int rule_use_hammer(const Board& b) {
  auto [px, py] = b.find_one(1);
  if (px < 0) return kNoop;
  auto [hx, hy] = b.find_one(3);
  if (hx < 0) {
    // Pickup gone from the board: hold the post and swing at anything close.
    for (auto [bx, by] : b.find_all(2))
      if (chebyd(px, py, bx, by) <= 1) return kAct;
    return kNoop;
  }
  // En route to the pickup the hammer is no help; jump barrels sharing the
  // row, including one that just landed on this very cell.
  for (auto [bx, by] : b.find_all(2))
    if (by == py && std::abs(bx - px) <= 1) return kUp;
  if (py == hy) return px == hx ? kNoop : toward_x(px, hx);
  if (is_floor_row(py)) {
    int tx = py > hy ? dk_ladder_x(py) : dk_ladder_x(py + 3);
    if (px != tx) return toward_x(px, tx);
  }
  return py > hy ? kUp : kDown;
}

}  // namespace

std::unique_ptr<OptionWorker> make_scripted_worker(const std::string& option_id,
                                                   env::ActionSpace space) {
  struct Entry {
    int planes;
    int (*rule)(const Board&);
  };
  static const std::map<std::string, Entry> kRules = {
      {"ascend", {5, rule_ascend}},
      {"deal_with_enemy", {5, rule_deal_with_enemy}},
      {"get_air", {5, rule_surface}},
      {"deliver_diver", {5, rule_surface}},
      {"get_diver", {5, rule_get_diver}},
      {"shoot_enemy", {5, rule_shoot_enemy}},
      {"climb", {6, rule_climb}},
      {"jump_barrel", {6, rule_jump_barrel}},
      {"use_hammer", {6, rule_use_hammer}},
  };
  auto it = kRules.find(option_id);
  if (it == kRules.end()) {
    throw std::invalid_argument("no scripted controller for option '" + option_id + "'");
  }
  return std::make_unique<ScriptedWorker>(option_id, space, it->second.planes,
                                          it->second.rule);
}

}  // namespace hyrl::options
