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

#ifndef HYRL_ENV_ENV_HPP_
#define HYRL_ENV_ENV_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hyrl/grad/tensor.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::env {

inline constexpr int kGrid = 12;  // all environments are 12x12, four floors

// Discrete action lattice shared by every environment.
enum Action : int {
  kNoop = 0,
  kLeft = 1,
  kRight = 2,
  kUp = 3,
  kDown = 4,
  kAct = 5,  // punch / shoot / swing / jump depending on the environment
};
inline constexpr int kNumActions = 6;

enum class ActionSpace { kDiscrete, kContinuous };

// Continuous actions live in [-1,1]^2 (horizontal, vertical) and are
// thresholded onto the discrete lattice at 0.3; both axes high means kAct.
int map_continuous(double ax, double ay);
// Canonical continuous embedding of a discrete action; maps back exactly.
std::pair<double, double> inverse_map(int action);

struct EnvConfig {
  std::string env_id = "minikangaroo";
  ActionSpace action_space = ActionSpace::kDiscrete;
  std::vector<std::string> modifications;
  int max_steps = 512;
  uint64_t seed = 0;
  // Optional JSON-lines debug trace (one object per step). Enabling it
  // extracts symbolic facts every step and therefore counts as symbolic use.
  std::string trace_path;
};

// Low-level observation plus (on request) the symbolic state. x is a 2-frame
// stack of one-hot entity planes, flattened to [2*E*144]. z is filled by
// symbolic extraction only: reset/step leave it empty so that consumers that
// never ask for facts provably never trigger extraction.
struct ObsPair {
  grad::Tensor x;
  std::vector<std::pair<std::string, uint8_t>> z;
};

struct StepResult {
  ObsPair obs;
  double reward = 0.0;
  bool done = false;
  std::map<std::string, double> info;
};

// Deterministic single-owner grid environment. Identical (config, seed,
// action sequence) reproduce bit-identical results; vectorized rollouts hold
// one instance per slot.
class Env {
 public:
  explicit Env(EnvConfig cfg);
  virtual ~Env() = default;

  Env(const Env&) = delete;
  Env& operator=(const Env&) = delete;

  const EnvConfig& config() const { return cfg_; }

  ObsPair reset() { return reset(cfg_.seed); }
  ObsPair reset(uint64_t seed);
  StepResult step(int action);
  StepResult step(double ax, double ay);  // continuous mode

  // Ordered atom names of the symbolic signature: each positive atom is
  // immediately followed by its not_ dual. Fixed per environment; the truth
  // vector over this order feeds the symbolic critic.
  const std::vector<std::string>& fact_signature() const { return signature_; }

  // Extracts (atom, truth) pairs in signature order for the current state.
  // Exactly one of p / not_p is true. Counted once per distinct state by the
  // symbolic-extraction instrumentation counter.
  const std::vector<std::pair<std::string, uint8_t>>& symbolic_facts();

  bool done() const { return done_; }
  int64_t steps() const { return step_count_; }
  int num_actions() const { return kNumActions; }
  int64_t obs_dim() const { return 2 * num_planes() * kGrid * kGrid; }

 protected:
  // Environment hooks. do_step applies one discrete action and returns the
  // reward; it may set done_. fill_planes writes the current frame
  // [E*144] one-hot planes; fill_facts writes one truth bit per positive
  // signature atom.
  virtual void do_reset(util::Rng& rng) = 0;
  virtual double do_step(int action) = 0;
  virtual int num_planes() const = 0;
  virtual void fill_planes(std::vector<double>& frame) const = 0;
  virtual void fill_facts(std::vector<uint8_t>& truth) const = 0;
  virtual void fill_info(std::map<std::string, double>& info) const = 0;

  // Called once by concrete constructors with the positive atom names.
  void init_signature(std::vector<std::string> positive_atoms);

  bool has_mod(const std::string& tag) const;
  void set_done() { done_ = true; }

  EnvConfig cfg_;

 private:
  StepResult step_impl(int action);
  ObsPair make_obs() const;
  void write_trace(int action, double reward);

  std::vector<std::string> positives_;
  std::vector<std::string> signature_;
  std::vector<double> prev_frame_, cur_frame_;
  std::vector<std::pair<std::string, uint8_t>> fact_cache_;
  int64_t fact_cache_stamp_ = -1;
  int64_t step_count_ = 0;
  int64_t stamp_ = 0;  // distinct-state counter across the env's lifetime
  bool done_ = true;   // unusable until the first reset
  std::ofstream trace_;
};

// Documented modification vocabulary per environment.
const std::map<std::string, std::vector<std::string>>& valid_modifications();

// Appends tag to cfg.modifications after validation; duplicates are dropped,
// so the operation is idempotent.
EnvConfig apply_modification(EnvConfig cfg, const std::string& tag);

// Constructs the configured environment; throws std::invalid_argument for an
// unknown env_id or a modification not valid for it. The instance still
// requires reset() before stepping.
std::unique_ptr<Env> make_env(const EnvConfig& cfg);

}  // namespace hyrl::env

#endif  // HYRL_ENV_ENV_HPP_
