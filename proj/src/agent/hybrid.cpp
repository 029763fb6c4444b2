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
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "hyrl/agent/agent.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::agent {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double gauss_logpdf(double a, double mean, double log_std) {
  double inv = std::exp(-log_std);
  double zed = (a - mean) * inv;
  return -0.5 * zed * zed - log_std - 0.5 * kLog2Pi;
}

double mixture_logpdf(const std::vector<GaussComponent>& cs,
                      const std::array<double, 2>& a) {
  double best = -1e300;
  std::vector<double> ex;
  ex.reserve(cs.size());
  for (const GaussComponent& c : cs) {
    if (c.weight <= 0.0) continue;
    double e = std::log(c.weight) + gauss_logpdf(a[0], c.mean[0], c.log_std[0]) +
               gauss_logpdf(a[1], c.mean[1], c.log_std[1]);
    ex.push_back(e);
    best = std::max(best, e);
  }
  if (ex.empty()) return -1e300;
  double total = 0.0;
  for (double e : ex) total += std::exp(e - best);
  return best + std::log(total);
}

grad::Tensor as_row(const grad::Tensor& x) {
  if (x.rank() == 2) return x;
  std::vector<double> d = x.vec();
  int64_t n = static_cast<int64_t>(d.size());
  return grad::Tensor::from({1, n}, std::move(d));
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionDist algebra

Sampled sample_and_logprob(const ActionDist& d, util::Rng& rng) {
  Sampled s;
  if (d.space == env::ActionSpace::kDiscrete) {
    s.discrete = static_cast<int>(
        rng.categorical(std::span<const double>(d.probs)));
    s.logprob = std::log(d.probs[static_cast<size_t>(s.discrete)]);
    return s;
  }
  std::vector<double> w;
  w.reserve(d.components.size());
  for (const GaussComponent& c : d.components) w.push_back(c.weight);
  const GaussComponent& c =
      d.components[static_cast<size_t>(rng.categorical(std::span<const double>(w)))];
  for (int i = 0; i < 2; ++i)
    s.continuous[static_cast<size_t>(i)] =
        c.mean[static_cast<size_t>(i)] +
        std::exp(c.log_std[static_cast<size_t>(i)]) * rng.normal();
  s.logprob = mixture_logpdf(d.components, s.continuous);
  return s;
}

double logprob_of(const ActionDist& d, int action) {
  if (d.space != env::ActionSpace::kDiscrete)
    throw std::logic_error("discrete log-prob of a continuous distribution");
  return std::log(d.probs.at(static_cast<size_t>(action)));
}

double logprob_of(const ActionDist& d, const std::array<double, 2>& action) {
  if (d.space != env::ActionSpace::kContinuous)
    throw std::logic_error("continuous log-prob of a discrete distribution");
  return mixture_logpdf(d.components, action);
}

double entropy_of(const ActionDist& d) {
  if (d.space == env::ActionSpace::kDiscrete) {
    double h = 0.0;
    for (double p : d.probs)
      if (p > 0.0) h -= p * std::log(p);
    return h;
  }
  // ln(2*pi*e) + sum of log-stds per component, weight-averaged.
  double h = 0.0;
  for (const GaussComponent& c : d.components)
    h += c.weight * (1.0 + kLog2Pi + c.log_std[0] + c.log_std[1]);
  return h;
}

int argmax_action(const ActionDist& d) {
  if (d.space != env::ActionSpace::kDiscrete)
    throw std::logic_error("argmax_action applies to discrete policies");
  size_t best = 0;
  for (size_t i = 1; i < d.probs.size(); ++i)
    if (d.probs[i] > d.probs[best]) best = i;
  return static_cast<int>(best);
}

std::array<double, 2> greedy_continuous(const ActionDist& d) {
  if (d.space != env::ActionSpace::kContinuous)
    throw std::logic_error("greedy_continuous applies to continuous policies");
  size_t best = 0;
  for (size_t i = 1; i < d.components.size(); ++i)
    if (d.components[i].weight > d.components[best].weight) best = i;
  return d.components[best].mean;
}

ActionDist mix_policies(const ActionDist& l, const ActionDist& n,
                        const std::array<double, 2>& beta) {
  if (l.space != n.space)
    throw std::invalid_argument("cannot mix policies over different action spaces");
  ActionDist out;
  out.space = l.space;
  if (l.space == env::ActionSpace::kDiscrete) {
    if (l.probs.size() != n.probs.size())
      throw std::invalid_argument("cannot mix policies of different arity");
    out.probs.resize(l.probs.size());
    for (size_t i = 0; i < l.probs.size(); ++i)
      out.probs[i] = beta[0] * l.probs[i] + beta[1] * n.probs[i];
  } else {
    out.components.reserve(l.components.size() + n.components.size());
    for (GaussComponent c : l.components) {
      c.weight *= beta[0];
      out.components.push_back(c);
    }
    for (GaussComponent c : n.components) {
      c.weight *= beta[1];
      out.components.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LogicCritic

LogicCritic::LogicCritic(std::vector<std::string> signature,
                         const std::vector<int64_t>& hidden, util::Rng& rng)
    : signature_(std::move(signature)),
      net_(grad::Mlp::make(static_cast<int64_t>(signature_.size()), hidden, 1,
                           rng)) {
  if (signature_.empty())
    throw std::invalid_argument("symbolic critic needs a nonempty signature");
}

grad::Tensor LogicCritic::encode(const Facts& z) const {
  if (z.size() != signature_.size())
    throw std::invalid_argument(
        "fact vector has " + std::to_string(z.size()) + " atoms, signature has " +
        std::to_string(signature_.size()));
  grad::Tensor t(std::vector<int64_t>{static_cast<int64_t>(signature_.size())});
  for (size_t i = 0; i < z.size(); ++i) {
    if (z[i].first != signature_[i])
      throw std::invalid_argument("fact '" + z[i].first +
                                  "' out of signature order, expected '" +
                                  signature_[i] + "'");
    t.at(static_cast<int64_t>(i)) = z[i].second ? 1.0 : 0.0;
  }
  return t;
}

double LogicCritic::value(const Facts& z) const {
  grad::Tensor row = as_row(encode(z));
  return detail::mlp_plain(net_, row).at(0);
}

grad::Tensor LogicCritic::value_batch(const std::vector<Facts>& zs) const {
  int64_t f = static_cast<int64_t>(signature_.size());
  grad::Tensor xs({static_cast<int64_t>(zs.size()), f});
  for (size_t b = 0; b < zs.size(); ++b) {
    grad::Tensor row = encode(zs[b]);
    std::copy(row.data(), row.data() + f, xs.data() + static_cast<int64_t>(b) * f);
  }
  grad::Tensor v = detail::mlp_plain(net_, xs);
  return grad::Tensor::from({static_cast<int64_t>(zs.size())}, std::move(v.vec()));
}

// ---------------------------------------------------------------------------
// HybridAgent

HybridAgent::HybridAgent(HybridConfig cfg, const env::Env& proto,
                         options::WorkerSet workers, uint64_t seed)
    : cfg_(std::move(cfg)), workers_(std::move(workers)) {
  util::Rng rng(seed);
  env::ActionSpace space = proto.config().action_space;

  manager_ = std::make_unique<LogicManager>(
      util::read_file(cfg_.manager_rules_path), cfg_.reason_cfg);
  if (cfg_.gate_rules_path.empty())
    gate_ = std::make_unique<Gate>(
        Gate::neural(proto.obs_dim(), cfg_.gate_hidden, rng));
  else
    gate_ = std::make_unique<Gate>(
        Gate::logic_from_file(cfg_.gate_rules_path, cfg_.reason_cfg));
  policy_ = NeuralPolicy::make(proto.obs_dim(), space, cfg_.policy_hidden, rng);
  critic_ = std::make_unique<LogicCritic>(proto.fact_signature(),
                                          cfg_.critic_hidden, rng);

  options::validate_worker_coverage(manager_->options(), workers_);
  for (const std::string& opt : manager_->options()) {
    const auto& w = workers_.at(opt);
    if (w->action_space() != space)
      throw std::invalid_argument("worker '" + opt +
                                  "' serves a different action space");
    worker_by_option_.push_back(w.get());
  }
}

ActionDist HybridAgent::logic_policy(const grad::Tensor& x, const Facts& z) const {
  ActionDist out;
  out.space = policy_.space;
  if (cfg_.manager_argmax) {
    const options::OptionWorker& w =
        *worker_by_option_[static_cast<size_t>(manager_->argmax_option(z))];
    if (out.space == env::ActionSpace::kDiscrete) {
      out.probs = w.action_probs(x);
    } else {
      std::array<double, 4> g = w.action_gaussian(x);
      out.components.push_back({1.0, {g[0], g[1]}, {g[2], g[3]}});
    }
    return out;
  }
  std::vector<double> dist = manager_->option_dist(z);
  if (out.space == env::ActionSpace::kDiscrete) {
    out.probs.assign(static_cast<size_t>(env::kNumActions), 0.0);
    for (size_t o = 0; o < dist.size(); ++o) {
      std::vector<double> p = worker_by_option_[o]->action_probs(x);
      for (size_t a = 0; a < out.probs.size(); ++a)
        out.probs[a] += dist[o] * p[a];
    }
  } else {
    for (size_t o = 0; o < dist.size(); ++o) {
      std::array<double, 4> g = worker_by_option_[o]->action_gaussian(x);
      out.components.push_back({dist[o], {g[0], g[1]}, {g[2], g[3]}});
    }
  }
  return out;
}

HybridAgent::Forward HybridAgent::forward(const grad::Tensor& x,
                                          const Facts& z) const {
  Forward f;
  grad::Tensor row = as_row(x);
  PolicyEval pe = policy_eval(policy_, row);
  f.pi_n = detail::dist_from_row(policy_, pe.head, 0);
  f.v_n = pe.value.at(0);

  f.option = manager_->argmax_option(z);
  f.pi_l = logic_policy(x, z);
  f.v_l = critic_->value(z);

  f.beta = gate_->beta(x, z);
  f.pi_h = mix_policies(f.pi_l, f.pi_n, f.beta);
  f.v_h = f.beta[0] * f.v_l + f.beta[1] * f.v_n;
  return f;
}

grad::ParamSet HybridAgent::trainable_params() {
  grad::ParamSet ps;
  ps.add_mlp("policy.encoder", &policy_.encoder);
  ps.add("policy.head.w", &policy_.policy_head.w);
  ps.add("policy.head.b", &policy_.policy_head.b);
  if (policy_.space == env::ActionSpace::kContinuous)
    ps.add("policy.log_std", &policy_.log_std);
  ps.add("value.w", &policy_.value_head.w);
  ps.add("value.b", &policy_.value_head.b);
  if (gate_->mode() == GateMode::kNeural) ps.add_mlp("gate", &gate_->net());
  ps.add_mlp("critic", &critic_->net());
  if (cfg_.theta_trainable) ps.add("theta", &manager_->weights().w);
  return ps;
}

uint64_t HybridAgent::worker_digest() const {
  uint64_t h = util::fnv1a("workers");
  for (const auto& [id, w] : workers_) {
    h = util::fnv1a(id, h);
    uint64_t d = w->param_digest();
    h = util::fnv1a(&d, sizeof(d), h);
  }
  return h;
}

}  // namespace hyrl::agent
