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

#ifndef HYRL_GRAD_TAPE_HPP_
#define HYRL_GRAD_TAPE_HPP_

#include <memory>
#include <vector>

#include "hyrl/grad/tensor.hpp"

namespace hyrl::grad {

// Reverse-mode tape. Ops evaluate eagerly while recording; backward() walks
// the record in reverse. A tape is built per evaluation and thrown away.
//
// Values are finite-checked at every op boundary; a NaN/Inf raises
// TapeError naming the op that produced it.
class TapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape {
 public:
  using Id = int32_t;

  // -- leaves ---------------------------------------------------------------
  Id input(Tensor value);             // differentiable leaf
  Id constant(Tensor value);          // leaf excluded from gradient checks
  Id constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  // -- elementwise, shapes must match ---------------------------------------
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id minimum(Id a, Id b);             // ties route gradient to the first arg
  Id logaddexp(Id a, Id b, double gamma);  // gamma*log(e^{a/g} + e^{b/g})
  // Floor-free variant: gamma*log(e^{a/g} + e^{b/g} - 1); requires a,b >= 0.
  // Exact identity when either side is zero; output >= max(a, b).
  Id logaddexp_excess(Id a, Id b, double gamma);

  // -- scalar-tensor ---------------------------------------------------------
  Id add_scalar(Id a, double s);
  Id mul_scalar(Id a, double s);
  Id min_scalar(Id a, double s);      // elementwise min(x, s)
  Id max_scalar(Id a, double s);      // elementwise max(x, s)
  Id mul_node1(Id a, Id s);           // s is a 1-element node

  // -- unary ------------------------------------------------------------------
  Id exp(Id a);
  Id log(Id a);
  Id tanh(Id a);
  Id relu(Id a);
  Id recip(Id a);
  Id clamp(Id a, double lo, double hi);  // pass-through subgradient inside [lo,hi]

  // -- linear algebra ----------------------------------------------------------
  Id matmul(Id a, Id b);                       // [M,K]x[K,N] -> [M,N]
  Id affine(Id x, Id w, Id b);                 // [B,K]x[K,N] + b[N] -> [B,N]
  Id add_rowvec(Id a, Id v);                   // [B,N] + v[N], explicit row broadcast
  Id scale_rows(Id a, Id v);                   // [B,N] * v[B], row b scaled by v[b]
  Id scale_cols(Id a, Id v);                   // [B,N] * v[N]

  // -- gather -------------------------------------------------------------------
  // out[i] = src[idx[i]]; src is 1-D, output takes the index shape.
  Id gather(Id src, std::shared_ptr<const std::vector<int64_t>> idx,
            std::vector<int64_t> out_shape);
  // out[b,j] = src[b, idx[j]]; src is 2-D.
  Id gather_cols(Id src, std::shared_ptr<const std::vector<int64_t>> idx);
  Id index_scalar(Id src, int64_t flat_index);  // 1-element view (copy) of src

  // -- reductions / normalization -------------------------------------------------
  Id prod_reduce(Id a, int axis);
  Id lse(Id a, int axis, double gamma);         // gamma*log sum exp(x/gamma), raw
  // Floor-free variant: gamma*log(1 + sum(e^{x/g} - 1)); requires x >= 0; exact
  // identity on singletons and exactly 0 on all-zero slices, so zero padding
  // is neutral.
  Id lse_excess(Id a, int axis, double gamma);
  Id softmax(Id a);                             // along last axis
  Id sum_axis(Id a, int axis);
  Id sum_all(Id a);
  Id mean_all(Id a);
  Id stack(const std::vector<Id>& xs);          // k tensors of shape S -> [k, S...]
  Id reshape(Id a, std::vector<int64_t> shape);

  // -- access -----------------------------------------------------------------
  const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  double scalar(Id id) const;
  size_t size() const { return nodes_.size(); }

  // Accumulates gradients of a scalar seed node into every reachable leaf.
  // May be called once per tape.
  void backward(Id seed);
  const Tensor& grad(Id id) const;
  bool has_grad(Id id) const;

 private:
  enum class Op : uint8_t {
    kLeaf, kConstLeaf, kAdd, kSub, kMul, kMinimum, kLogAddExp, kAddScalar,
    kMulScalar, kMinScalar, kMaxScalar, kMulNode1, kExp, kLog, kTanh, kRelu,
    kRecip, kClamp, kMatmul, kAffine, kAddRowvec, kScaleRows, kScaleCols,
    kGather, kGatherCols, kIndexScalar, kProdReduce, kLse, kLseExcess,
    kSoftmax, kSumAxis, kSumAll, kMeanAll, kStack, kReshape,
  };

  struct Node {
    Op op = Op::kLeaf;
    Tensor value;
    Id a = -1, b = -1, c = -1;           // inputs (c used by affine)
    std::vector<Id> list;                // inputs for stack
    double s0 = 0.0, s1 = 0.0;           // scalar attrs (lo/hi, gamma, scalar)
    int axis = -1;
    int64_t flat_index = -1;
    std::shared_ptr<const std::vector<int64_t>> idx;  // gather payload
  };

  Id push(Node n, const char* opname);
  const Tensor& val(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  void accumulate(Id id, const Tensor& g);
  void backward_node(size_t i);
  // True when a gradient reaching this node can still reach a differentiable
  // leaf; constants and constant-only subtrees are skipped during backward.
  bool needs(Id id) const { return needs_[static_cast<size_t>(id)] != 0; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<uint8_t> has_grad_;
  std::vector<uint8_t> needs_;
  bool backward_done_ = false;
};

}  // namespace hyrl::grad

#endif  // HYRL_GRAD_TAPE_HPP_
