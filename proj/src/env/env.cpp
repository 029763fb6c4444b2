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

#include "hyrl/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "envs_internal.hpp"
#include "hyrl/util/counters.hpp"
#include "json.hpp"

namespace hyrl::env {

int map_continuous(double ax, double ay) {
  bool hx = std::fabs(ax) > 0.3;
  bool hy = std::fabs(ay) > 0.3;
  if (hx && hy) return kAct;
  if (hx) return ax < 0 ? kLeft : kRight;
  if (hy) return ay > 0 ? kUp : kDown;
  return kNoop;
}

std::pair<double, double> inverse_map(int action) {
  switch (action) {
    case kNoop: return {0.0, 0.0};
    case kLeft: return {-0.8, 0.0};
    case kRight: return {0.8, 0.0};
    case kUp: return {0.0, 0.8};
    case kDown: return {0.0, -0.8};
    case kAct: return {0.8, 0.8};
    default: throw std::out_of_range("unknown discrete action");
  }
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.trace_path.empty()) {
    trace_.open(cfg_.trace_path, std::ios::app);
    if (!trace_) throw std::runtime_error("cannot open trace file " + cfg_.trace_path);
  }
}

void Env::init_signature(std::vector<std::string> positive_atoms) {
  positives_ = std::move(positive_atoms);
  signature_.clear();
  for (const std::string& p : positives_) {
    signature_.push_back(p);
    signature_.push_back("not_" + p);
  }
}

bool Env::has_mod(const std::string& tag) const {
  return std::find(cfg_.modifications.begin(), cfg_.modifications.end(), tag) !=
         cfg_.modifications.end();
}

ObsPair Env::reset(uint64_t seed) {
  util::Rng rng(seed);
  step_count_ = 0;
  done_ = false;
  ++stamp_;
  do_reset(rng);
  cur_frame_.assign(static_cast<size_t>(num_planes()) * kGrid * kGrid, 0.0);
  fill_planes(cur_frame_);
  prev_frame_ = cur_frame_;
  if (trace_.is_open()) {
    nlohmann::json j;
    j["reset"] = true;
    j["seed"] = seed;
    trace_ << j.dump() << '\n';
  }
  return make_obs();
}

StepResult Env::step(int action) {
  if (cfg_.action_space != ActionSpace::kDiscrete) {
    throw std::logic_error("environment is configured for continuous actions");
  }
  return step_impl(action);
}

StepResult Env::step_impl(int action) {
  if (stamp_ == 0) throw std::logic_error("step before reset");
  if (done_) throw std::logic_error("step after episode end");
  if (action < 0 || action >= kNumActions) {
    throw std::out_of_range("action " + std::to_string(action) + " out of range");
  }
  prev_frame_ = cur_frame_;
  double reward = do_step(action);
  ++step_count_;
  ++stamp_;
  if (step_count_ >= cfg_.max_steps) done_ = true;
  std::fill(cur_frame_.begin(), cur_frame_.end(), 0.0);
  fill_planes(cur_frame_);

  StepResult res;
  res.obs = make_obs();
  res.reward = reward;
  res.done = done_;
  fill_info(res.info);
  write_trace(action, reward);
  return res;
}

StepResult Env::step(double ax, double ay) {
  if (cfg_.action_space != ActionSpace::kContinuous) {
    throw std::logic_error("environment is configured for discrete actions");
  }
  if (std::fabs(ax) > 1.0 || std::fabs(ay) > 1.0 || !std::isfinite(ax) ||
      !std::isfinite(ay)) {
    throw std::out_of_range("continuous action outside [-1,1]^2");
  }
  return step_impl(map_continuous(ax, ay));
}

const std::vector<std::pair<std::string, uint8_t>>& Env::symbolic_facts() {
  if (stamp_ == 0) throw std::logic_error("symbolic_facts before reset");
  if (fact_cache_stamp_ != stamp_) {
    std::vector<uint8_t> truth(positives_.size(), 0);
    fill_facts(truth);
    fact_cache_.clear();
    fact_cache_.reserve(signature_.size());
    for (size_t i = 0; i < positives_.size(); ++i) {
      fact_cache_.emplace_back(signature_[2 * i], truth[i]);
      fact_cache_.emplace_back(signature_[2 * i + 1],
                               static_cast<uint8_t>(truth[i] ? 0 : 1));
    }
    fact_cache_stamp_ = stamp_;
    util::Counters::instance().symbolic_fact_extractions.fetch_add(
        1, std::memory_order_relaxed);
  }
  return fact_cache_;
}

ObsPair Env::make_obs() const {
  ObsPair obs;
  obs.x = grad::Tensor({obs_dim()});
  double* p = obs.x.data();
  std::copy(prev_frame_.begin(), prev_frame_.end(), p);
  std::copy(cur_frame_.begin(), cur_frame_.end(), p + prev_frame_.size());
  return obs;
}

void Env::write_trace(int action, double reward) {
  if (!trace_.is_open()) return;
  nlohmann::json j;
  j["t"] = step_count_;
  j["action"] = action;
  j["reward"] = reward;
  j["done"] = done_;
  nlohmann::json facts = nlohmann::json::object();
  for (const auto& [atom, truth] : symbolic_facts()) facts[atom] = static_cast<int>(truth);
  j["facts"] = std::move(facts);
  trace_ << j.dump() << '\n';
}

const std::map<std::string, std::vector<std::string>>& valid_modifications() {
  static const std::map<std::string, std::vector<std::string>> kMods = {
      {"minikangaroo",
       {"random_start", "disable_enemies", "platform_checkpoints", "shorten_timelimit"}},
      {"miniseaquest",
       {"random_start", "disable_enemies", "unlimited_oxygen", "shorten_timelimit"}},
      {"minidonkeykong",
       {"random_start", "disable_enemies", "no_hammer", "spawn_barrel_near_player",
        "platform_checkpoints", "shorten_timelimit"}},
  };
  return kMods;
}

namespace {

void check_mod(const std::string& env_id, const std::string& tag) {
  const auto& table = valid_modifications();
  auto it = table.find(env_id);
  if (it == table.end()) throw std::invalid_argument("unknown env_id '" + env_id + "'");
  if (std::find(it->second.begin(), it->second.end(), tag) == it->second.end()) {
    throw std::invalid_argument("modification '" + tag + "' is not valid for " + env_id);
  }
}

}  // namespace

EnvConfig apply_modification(EnvConfig cfg, const std::string& tag) {
  check_mod(cfg.env_id, tag);
  if (std::find(cfg.modifications.begin(), cfg.modifications.end(), tag) ==
      cfg.modifications.end()) {
    cfg.modifications.push_back(tag);
  }
  return cfg;
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  for (const std::string& tag : cfg.modifications) check_mod(cfg.env_id, tag);
  if (cfg.env_id == "minikangaroo") return make_minikangaroo(cfg);
  if (cfg.env_id == "miniseaquest") return make_miniseaquest(cfg);
  if (cfg.env_id == "minidonkeykong") return make_minidonkeykong(cfg);
  throw std::invalid_argument("unknown env_id '" + cfg.env_id + "'");
}

}  // namespace hyrl::env
