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
#include <stdexcept>
#include <utility>

#include "hyrl/agent/agent.hpp"
#include "hyrl/util/io.hpp"

namespace hyrl::agent {

namespace {

std::array<double, 2> softmax2(double a, double b) {
  double m = std::max(a, b);
  double ea = std::exp(a - m), eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

Gate Gate::neural(int64_t obs_dim, const std::vector<int64_t>& hidden,
                  util::Rng& rng) {
  Gate g;
  g.mode_ = GateMode::kNeural;
  g.net_ = grad::Mlp::make(obs_dim, hidden, 2, rng);
  // Zero final layer: the untrained gate blends exactly half and half.
  grad::Linear& last = g.net_->layers.back();
  std::fill(last.w.vec().begin(), last.w.vec().end(), 0.0);
  std::fill(last.b.vec().begin(), last.b.vec().end(), 0.0);
  return g;
}

Gate Gate::logic(std::string rule_text, reason::ReasonerConfig rcfg) {
  Gate g;
  g.mode_ = GateMode::kLogic;
  g.rules_ = std::make_unique<LogicManager>(std::move(rule_text), rcfg);
  const auto& heads = g.rules_->options();
  bool has_l = std::find(heads.begin(), heads.end(), "logic_agent") != heads.end();
  bool has_n = std::find(heads.begin(), heads.end(), "neural_agent") != heads.end();
  if (heads.size() != 2 || !has_l || !has_n)
    throw std::invalid_argument(
        "gate rules must define exactly the heads logic_agent and neural_agent");
  return g;
}

Gate Gate::logic_from_file(const std::string& path, reason::ReasonerConfig rcfg) {
  return logic(util::read_file(path), rcfg);
}

std::array<double, 2> Gate::beta(const grad::Tensor& x, const Facts& z) const {
  if (mode_ == GateMode::kLogic) {
    std::vector<double> vals = rules_->head_valuations(z);
    const auto& heads = rules_->options();
    double vl = 0.0, vn = 0.0;
    for (size_t i = 0; i < heads.size(); ++i)
      (heads[i] == "logic_agent" ? vl : vn) = vals[i];
    vl = std::clamp(vl, kValuationClip, 1.0 - kValuationClip);
    vn = std::clamp(vn, kValuationClip, 1.0 - kValuationClip);
    return softmax2(logit(vl), logit(vn));
  }
  grad::Tensor row = x;
  if (row.rank() == 1) {
    std::vector<double> d = row.vec();
    int64_t n = static_cast<int64_t>(d.size());
    row = grad::Tensor::from({1, n}, std::move(d));
  }
  grad::Tensor logits = detail::mlp_plain(*net_, row);
  return softmax2(logits.at(0), logits.at(1));
}

grad::Tensor Gate::beta_batch(const grad::Tensor& xs) const {
  if (mode_ != GateMode::kNeural)
    throw std::logic_error("beta_batch requires the neural gate");
  grad::Tensor logits = detail::mlp_plain(*net_, xs);
  grad::Tensor out(logits.shape());
  for (int64_t b = 0; b < logits.dim(0); ++b) {
    auto p = softmax2(logits.at2(b, 0), logits.at2(b, 1));
    out.at2(b, 0) = p[0];
    out.at2(b, 1) = p[1];
  }
  return out;
}

grad::Mlp& Gate::net() {
  if (mode_ != GateMode::kNeural)
    throw std::logic_error("the logic gate has no network");
  return *net_;
}

const grad::Mlp& Gate::net() const {
  if (mode_ != GateMode::kNeural)
    throw std::logic_error("the logic gate has no network");
  return *net_;
}

const LogicManager& Gate::rules() const {
  if (mode_ != GateMode::kLogic)
    throw std::logic_error("the neural gate has no rules");
  return *rules_;
}

uint64_t Gate::rule_digest() const {
  return mode_ == GateMode::kLogic ? rules_->rule_digest() : 0;
}

}  // namespace hyrl::agent
