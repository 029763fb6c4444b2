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
#include <stdexcept>
#include <string>
#include <vector>

#include "hyrl/train/train.hpp"
#include "hyrl/util/counters.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::train {

const char* const kMetricsHeader =
    "step,return_mean,return_std,episodes,floor1,floor2,floor3,floor4,"
    "beta_l_mean,policy_entropy,gate_entropy,policy_loss,value_loss,"
    "clip_fraction,approx_kl,grad_norm,loss";

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = kMetricsHeader;
  out.push_back('\n');
  for (const MetricRow& r : rows) {
    out += std::to_string(r.step);
    out.push_back(',');
    out += util::fmt_double(r.return_mean);
    out.push_back(',');
    out += util::fmt_double(r.return_std);
    out.push_back(',');
    out += std::to_string(r.episodes);
    for (double f : r.floors) {
      out.push_back(',');
      out += util::fmt_double(f);
    }
    out.push_back(',');
    out += util::fmt_double(r.beta_l_mean);
    out.push_back(',');
    out += util::fmt_double(r.stats.policy_entropy);
    out.push_back(',');
    out += util::fmt_double(r.stats.gate_entropy);
    out.push_back(',');
    out += util::fmt_double(r.stats.policy_loss);
    out.push_back(',');
    out += util::fmt_double(r.stats.value_loss);
    out.push_back(',');
    out += util::fmt_double(r.stats.clip_fraction);
    out.push_back(',');
    out += util::fmt_double(r.stats.approx_kl);
    out.push_back(',');
    out += util::fmt_double(r.stats.grad_norm);
    out.push_back(',');
    out += util::fmt_double(r.stats.loss);
    out.push_back('\n');
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  util::write_file(path, metrics_to_csv(rows));
}

namespace {

MetricRow summarize(int64_t step, const std::vector<RolloutDriver::Episode>& eps,
                    double beta_l_mean, const PpoStats& stats) {
  MetricRow row;
  row.step = step;
  row.episodes = static_cast<int64_t>(eps.size());
  row.beta_l_mean = beta_l_mean;
  row.stats = stats;
  if (!eps.empty()) {
    double mean = 0.0;
    for (const auto& e : eps) mean += e.ret;
    mean /= static_cast<double>(eps.size());
    double var = 0.0;
    for (const auto& e : eps) var += (e.ret - mean) * (e.ret - mean);
    var /= static_cast<double>(eps.size());
    row.return_mean = mean;
    row.return_std = std::sqrt(var);
    for (int k = 0; k < 4; ++k) {
      int64_t hit = 0;
      for (const auto& e : eps)
        if (e.floor >= static_cast<double>(k)) ++hit;
      row.floors[static_cast<size_t>(k)] =
          static_cast<double>(hit) / static_cast<double>(eps.size());
    }
  }
  return row;
}

int64_t update_count(const TrainConfig& cfg) {
  const int64_t per = static_cast<int64_t>(cfg.num_envs) * cfg.rollout_steps;
  return (cfg.total_steps + per - 1) / per;
}

void check_env_count(const std::vector<std::unique_ptr<env::Env>>& envs,
                     const TrainConfig& cfg) {
  if (static_cast<int>(envs.size()) != cfg.num_envs)
    throw std::invalid_argument("stage: env vector size " +
                                std::to_string(envs.size()) +
                                " != num_envs " + std::to_string(cfg.num_envs));
}

}  // namespace

StageResult pretrain_stage(agent::HybridAgent& agent,
                           std::vector<std::unique_ptr<env::Env>>& envs,
                           const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  check_env_count(envs, cfg);
  const uint64_t workers_before = agent.worker_digest();

  RolloutDriver driver(&envs, cfg.seed);
  grad::Adam opt(cfg.learning_rate);
  util::Rng rng(cfg.seed ^ 0x5eedULL);

  StageResult result;
  const int64_t updates = update_count(cfg);
  for (int64_t u = 0; u < updates; ++u) {
    RolloutBatch batch = driver.collect(agent, cfg.rollout_steps);
    compute_gae(batch, cfg);
    PpoStats stats = ppo_update(agent, opt, batch, cfg, rng);
    result.mean_beta_l = batch.mean_beta_l();
    result.metrics.push_back(summarize(driver.total_steps(), driver.drain_episodes(),
                                       result.mean_beta_l, stats));
  }
  result.env_steps = driver.total_steps();

  if (agent.worker_digest() != workers_before)
    throw std::logic_error("pretrain_stage: worker parameters changed");

  result.agent_checkpoint = out_dir + "/h2rl.ckpt";
  result.neural_checkpoint = out_dir + "/h2rl_pre.ckpt";
  result.metrics_csv = out_dir + "/pretrain_metrics.csv";
  agent::save_agent(agent, result.agent_checkpoint);
  agent::save_neural(agent.policy(), result.neural_checkpoint);
  write_metrics_csv(result.metrics_csv, result.metrics);
  return result;
}

StageResult train_neural_stage(agent::NeuralPolicy& policy,
                               std::vector<std::unique_ptr<env::Env>>& envs,
                               const TrainConfig& cfg,
                               const std::string& out_dir,
                               const std::string& tag) {
  cfg.validate();
  check_env_count(envs, cfg);
  const util::CounterSnapshot before = util::snapshot_counters();

  RolloutDriver driver(&envs, cfg.seed);
  grad::Adam opt(cfg.learning_rate);
  util::Rng rng(cfg.seed ^ 0x5eedULL);

  StageResult result;
  const int64_t updates = update_count(cfg);
  for (int64_t u = 0; u < updates; ++u) {
    RolloutBatch batch = driver.collect(policy, cfg.rollout_steps);
    compute_gae(batch, cfg);
    PpoStats stats = ppo_update(policy, opt, batch, cfg, rng);
    result.metrics.push_back(summarize(driver.total_steps(),
                                       driver.drain_episodes(), 0.0, stats));
  }
  result.env_steps = driver.total_steps();

  if (!util::pure_neural_since(before))
    throw std::logic_error(
        "train_neural_stage: symbolic extraction or reasoner activity "
        "detected during a neural-only stage");

  result.neural_checkpoint = out_dir + "/" + tag + ".ckpt";
  result.metrics_csv = out_dir + "/" + tag + "_metrics.csv";
  agent::save_neural(policy, result.neural_checkpoint);
  write_metrics_csv(result.metrics_csv, result.metrics);
  return result;
}

StageResult posttrain_stage(const std::string& neural_ckpt,
                            std::vector<std::unique_ptr<env::Env>>& envs,
                            const TrainConfig& cfg, const std::string& out_dir) {
  if (envs.empty()) throw std::invalid_argument("posttrain_stage: no envs");
  agent::NeuralPolicy policy = agent::load_neural(neural_ckpt);
  if (policy.obs_dim != envs[0]->obs_dim())
    throw std::invalid_argument("posttrain_stage: checkpoint obs_dim " +
                                std::to_string(policy.obs_dim) +
                                " != env obs_dim " +
                                std::to_string(envs[0]->obs_dim()));
  return train_neural_stage(policy, envs, cfg, out_dir, "h2rl_pre_plus");
}

}  // namespace hyrl::train
