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

#ifndef HYRL_GRAD_NN_HPP_
#define HYRL_GRAD_NN_HPP_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hyrl/grad/tape.hpp"
#include "hyrl/util/rng.hpp"

namespace hyrl::grad {

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

inline Linear make_linear(int64_t in, int64_t out, util::Rng& rng, double gain = 1.0) {
  Linear l;
  l.w = Tensor(std::vector<int64_t>{in, out});
  l.b = Tensor(std::vector<int64_t>{out});
  double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : l.w.vec()) v = rng.uniform(-bound, bound);
  return l;
}

struct BoundLinear {
  Tape::Id w, b;
};

inline BoundLinear bind(Tape& tape, const Linear& l) {
  return {tape.input(l.w), tape.input(l.b)};
}

inline Tape::Id apply(Tape& tape, const BoundLinear& l, Tape::Id x) {
  return tape.affine(x, l.w, l.b);
}

// MLP with tanh hidden activations; output layer is linear.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp make(int64_t in, const std::vector<int64_t>& hidden, int64_t out,
                  util::Rng& rng, double out_gain = 1.0) {
    Mlp m;
    int64_t prev = in;
    for (int64_t h : hidden) {
      m.layers.push_back(make_linear(prev, h, rng, 1.0));
      prev = h;
    }
    m.layers.push_back(make_linear(prev, out, rng, out_gain));
    return m;
  }
};

struct BoundMlp {
  std::vector<BoundLinear> layers;
};

inline BoundMlp bind(Tape& tape, const Mlp& m) {
  BoundMlp b;
  b.layers.reserve(m.layers.size());
  for (const Linear& l : m.layers) b.layers.push_back(bind(tape, l));
  return b;
}

inline Tape::Id forward(Tape& tape, const BoundMlp& m, Tape::Id x) {
  Tape::Id h = x;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    h = apply(tape, m.layers[i], h);
    if (i + 1 < m.layers.size()) h = tape.tanh(h);
  }
  return h;
}

// Named parameter registry; flattens module parameters for the optimizer,
// global-norm clipping and checkpoint IO.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

class ParamSet {
 public:
  void add(const std::string& name, Tensor* t) { refs_.push_back({name, t}); }
  void add_mlp(const std::string& prefix, Mlp* m) {
    for (size_t i = 0; i < m->layers.size(); ++i) {
      add(prefix + ".l" + std::to_string(i) + ".w", &m->layers[i].w);
      add(prefix + ".l" + std::to_string(i) + ".b", &m->layers[i].b);
    }
  }
  const std::vector<ParamRef>& refs() const { return refs_; }
  size_t size() const { return refs_.size(); }

 private:
  std::vector<ParamRef> refs_;
};

// Adam with bias correction and optional global-norm gradient clipping.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // grads[i] pairs with params.refs()[i]; returns pre-clip global norm.
  double step(const ParamSet& params, const std::vector<Tensor>& grads,
              double max_grad_norm) {
    const auto& refs = params.refs();
    if (grads.size() != refs.size())
      throw std::invalid_argument("Adam::step: grad/param count mismatch");
    if (m_.empty()) {
      for (const auto& r : refs) {
        m_.emplace_back(r.tensor->shape(), 0.0);
        v_.emplace_back(r.tensor->shape(), 0.0);
      }
    }
    if (m_.size() != refs.size())
      throw std::invalid_argument("Adam::step: parameter set changed size");
    double sq = 0.0;
    for (const Tensor& g : grads)
      for (double x : g.vec()) sq += x * x;
    double norm = std::sqrt(sq);
    double scale = (max_grad_norm > 0.0 && norm > max_grad_norm)
                       ? max_grad_norm / (norm + 1e-12)
                       : 1.0;
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < refs.size(); ++i) {
      Tensor& p = *refs[i].tensor;
      const Tensor& g = grads[i];
      for (int64_t k = 0; k < p.size(); ++k) {
        double gk = g.at(k) * scale;
        double mk = m_[i].at(k) = beta1_ * m_[i].at(k) + (1.0 - beta1_) * gk;
        double vk = v_[i].at(k) = beta2_ * v_[i].at(k) + (1.0 - beta2_) * gk * gk;
        p.at(k) -= lr_ * (mk / bc1) / (std::sqrt(vk / bc2) + eps_);
      }
    }
    return norm;
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace hyrl::grad

#endif  // HYRL_GRAD_NN_HPP_
