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

#include "hyrl/agent/agent.hpp"
#include "hyrl/util/digest.hpp"

namespace hyrl::agent {

namespace detail {

grad::Tensor linear_plain(const grad::Linear& l, const grad::Tensor& xs) {
  int64_t batch = xs.dim(0), in = l.w.dim(0), out = l.w.dim(1);
  if (xs.dim(1) != in)
    throw std::invalid_argument("linear_plain: input width " +
                                xs.shape_str() + " does not match " +
                                l.w.shape_str());
  grad::Tensor y({batch, out});
  for (int64_t b = 0; b < batch; ++b) {
    double* yrow = y.data() + b * out;
    for (int64_t o = 0; o < out; ++o) yrow[o] = l.b.at(o);
    const double* xrow = xs.data() + b * in;
    for (int64_t i = 0; i < in; ++i) {
      double xv = xrow[i];
      if (xv == 0.0) continue;
      const double* wrow = l.w.data() + i * out;
      for (int64_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
    }
  }
  return y;
}

grad::Tensor mlp_plain(const grad::Mlp& m, const grad::Tensor& xs, bool tanh_last) {
  grad::Tensor h = xs;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    h = linear_plain(m.layers[i], h);
    if (i + 1 < m.layers.size() || tanh_last)
      for (double& v : h.vec()) v = std::tanh(v);
  }
  return h;
}

void digest_mlp(const grad::Mlp& m, uint64_t& h) {
  for (const grad::Linear& l : m.layers) {
    h = util::fnv1a(l.w.data(), sizeof(double) * static_cast<size_t>(l.w.size()), h);
    h = util::fnv1a(l.b.data(), sizeof(double) * static_cast<size_t>(l.b.size()), h);
  }
}

ActionDist dist_from_row(const NeuralPolicy& p, const grad::Tensor& head,
                         int64_t row) {
  ActionDist dist;
  dist.space = p.space;
  int64_t width = head.dim(1);
  const double* h = head.data() + row * width;
  if (p.space == env::ActionSpace::kDiscrete) {
    double m = h[0];
    for (int64_t i = 1; i < width; ++i) m = std::max(m, h[i]);
    double total = 0.0;
    dist.probs.resize(static_cast<size_t>(width));
    for (int64_t i = 0; i < width; ++i) {
      dist.probs[static_cast<size_t>(i)] = std::exp(h[i] - m);
      total += dist.probs[static_cast<size_t>(i)];
    }
    for (double& q : dist.probs) q /= total;
  } else {
    GaussComponent c;
    c.weight = 1.0;
    c.mean = {h[0], h[1]};
    c.log_std = {std::clamp(p.log_std.at(0), -5.0, 2.0),
                 std::clamp(p.log_std.at(1), -5.0, 2.0)};
    dist.components.push_back(c);
  }
  return dist;
}

}  // namespace detail

NeuralPolicy NeuralPolicy::make(int64_t obs_dim, env::ActionSpace space,
                                const std::vector<int64_t>& hidden,
                                util::Rng& rng) {
  if (hidden.empty())
    throw std::invalid_argument("policy needs at least one hidden layer");
  NeuralPolicy p;
  p.space = space;
  p.obs_dim = obs_dim;
  std::vector<int64_t> trunk(hidden.begin(), hidden.end() - 1);
  p.encoder = grad::Mlp::make(obs_dim, trunk, hidden.back(), rng);
  int64_t head_out = space == env::ActionSpace::kDiscrete ? env::kNumActions : 2;
  p.policy_head = grad::make_linear(hidden.back(), head_out, rng, 0.01);
  p.value_head = grad::make_linear(hidden.back(), 1, rng, 1.0);
  p.log_std = grad::Tensor(std::vector<int64_t>{2}, -0.5);
  return p;
}

uint64_t NeuralPolicy::param_digest() const {
  uint64_t h = util::fnv1a(space == env::ActionSpace::kDiscrete ? "d" : "c");
  detail::digest_mlp(encoder, h);
  h = util::fnv1a(policy_head.w.data(),
                  sizeof(double) * static_cast<size_t>(policy_head.w.size()), h);
  h = util::fnv1a(policy_head.b.data(),
                  sizeof(double) * static_cast<size_t>(policy_head.b.size()), h);
  h = util::fnv1a(value_head.w.data(),
                  sizeof(double) * static_cast<size_t>(value_head.w.size()), h);
  h = util::fnv1a(value_head.b.data(),
                  sizeof(double) * static_cast<size_t>(value_head.b.size()), h);
  h = util::fnv1a(log_std.data(),
                  sizeof(double) * static_cast<size_t>(log_std.size()), h);
  return h;
}

PolicyEval policy_eval(const NeuralPolicy& p, const grad::Tensor& xs) {
  if (xs.rank() != 2 || xs.dim(1) != p.obs_dim)
    throw std::invalid_argument("policy_eval: expected [B," +
                                std::to_string(p.obs_dim) + "], got " +
                                xs.shape_str());
  grad::Tensor h = detail::mlp_plain(p.encoder, xs, /*tanh_last=*/true);
  PolicyEval out;
  out.head = detail::linear_plain(p.policy_head, h);
  if (p.space == env::ActionSpace::kContinuous)
    for (double& v : out.head.vec()) v = std::tanh(v);
  grad::Tensor v = detail::linear_plain(p.value_head, h);
  out.value = grad::Tensor::from({xs.dim(0)}, std::move(v.vec()));
  return out;
}

ActionDist neural_dist(const NeuralPolicy& p, const grad::Tensor& x) {
  grad::Tensor row = x;
  if (row.rank() == 1) {
    std::vector<double> d = row.vec();
    int64_t n = static_cast<int64_t>(d.size());
    row = grad::Tensor::from({1, n}, std::move(d));
  }
  PolicyEval pe = policy_eval(p, row);
  return detail::dist_from_row(p, pe.head, 0);
}

}  // namespace hyrl::agent
