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

#include "hyrl/grad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hyrl::grad {
namespace {

// (outer, n, inner) decomposition of `shape` around `axis`.
struct AxisSplit {
  int64_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<int64_t>& shape, int axis) {
  if (axis < 0 || static_cast<size_t>(axis) >= shape.size())
    throw TapeError("reduction axis out of range");
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  s.n = shape[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::vector<int64_t> drop_axis(const std::vector<int64_t>& shape, int axis) {
  std::vector<int64_t> out;
  for (size_t i = 0; i < shape.size(); ++i)
    if (i != static_cast<size_t>(axis)) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

void require(bool cond, const char* msg) {
  if (!cond) throw TapeError(msg);
}

}  // namespace

Tape::Id Tape::push(Node n, const char* opname) {
  if (!n.value.all_finite())
    throw TapeError(std::string("non-finite intermediate produced by op ") + opname);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n), "input");
}

Tape::Id Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConstLeaf;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

double Tape::scalar(Id id) const {
  const Tensor& t = val(id);
  require(t.size() == 1, "scalar(): node is not 1-element");
  return t.at(0);
}

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

Tape::Id Tape::add(Id a, Id b) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "add: shape mismatch");
  Tensor out = ta;
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  Node n;
  n.op = Op::kAdd; n.a = a; n.b = b; n.value = std::move(out);
  return push(std::move(n), "add");
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "sub: shape mismatch");
  Tensor out = ta;
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  Node n;
  n.op = Op::kSub; n.a = a; n.b = b; n.value = std::move(out);
  return push(std::move(n), "sub");
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  Node n;
  n.op = Op::kMul; n.a = a; n.b = b; n.value = std::move(out);
  return push(std::move(n), "mul");
}

Tape::Id Tape::minimum(Id a, Id b) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "minimum: shape mismatch");
  Tensor out = ta;
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) po[i] = std::min(po[i], pb[i]);
  Node n;
  n.op = Op::kMinimum; n.a = a; n.b = b; n.value = std::move(out);
  return push(std::move(n), "minimum");
}

Tape::Id Tape::logaddexp(Id a, Id b, double gamma) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "logaddexp: shape mismatch");
  require(gamma > 0.0, "logaddexp: gamma must be positive");
  Tensor out = ta;
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) {
    double m = std::max(pa[i], pb[i]);
    po[i] = m + gamma * std::log(std::exp((pa[i] - m) / gamma) + std::exp((pb[i] - m) / gamma));
  }
  Node n;
  n.op = Op::kLogAddExp; n.a = a; n.b = b; n.s0 = gamma; n.value = std::move(out);
  return push(std::move(n), "logaddexp");
}

Tape::Id Tape::logaddexp_excess(Id a, Id b, double gamma) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.same_shape(tb), "logaddexp_excess: shape mismatch");
  require(gamma > 0.0, "logaddexp_excess: gamma must be positive");
  Tensor out = ta;
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < out.size(); ++i) {
    require(pa[i] >= 0.0 && pb[i] >= 0.0, "logaddexp_excess: negative input");
    double m = std::max(pa[i], pb[i]);
    // One exponential is exactly 1, so the sum stays >= 1 and log(.) >= 0.
    double s = std::exp((pa[i] - m) / gamma) + std::exp((pb[i] - m) / gamma) -
               std::exp(-m / gamma);
    po[i] = m + gamma * std::log(s);
  }
  Node n;
  n.op = Op::kLogAddExp; n.a = a; n.b = b; n.s0 = gamma; n.value = std::move(out);
  return push(std::move(n), "logaddexp_excess");
}

Tape::Id Tape::add_scalar(Id a, double s) {
  Tensor out = val(a);
  for (double& v : out.vec()) v += s;
  Node n;
  n.op = Op::kAddScalar; n.a = a; n.s0 = s; n.value = std::move(out);
  return push(std::move(n), "add_scalar");
}

Tape::Id Tape::mul_scalar(Id a, double s) {
  Tensor out = val(a);
  for (double& v : out.vec()) v *= s;
  Node n;
  n.op = Op::kMulScalar; n.a = a; n.s0 = s; n.value = std::move(out);
  return push(std::move(n), "mul_scalar");
}

Tape::Id Tape::min_scalar(Id a, double s) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::min(v, s);
  Node n;
  n.op = Op::kMinScalar; n.a = a; n.s0 = s; n.value = std::move(out);
  return push(std::move(n), "min_scalar");
}

Tape::Id Tape::max_scalar(Id a, double s) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::max(v, s);
  Node n;
  n.op = Op::kMaxScalar; n.a = a; n.s0 = s; n.value = std::move(out);
  return push(std::move(n), "max_scalar");
}

Tape::Id Tape::mul_node1(Id a, Id s) {
  require(val(s).size() == 1, "mul_node1: scale must be 1-element");
  double k = val(s).at(0);
  Tensor out = val(a);
  for (double& v : out.vec()) v *= k;
  Node n;
  n.op = Op::kMulNode1; n.a = a; n.b = s; n.value = std::move(out);
  return push(std::move(n), "mul_node1");
}

Tape::Id Tape::exp(Id a) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::exp(v);
  Node n;
  n.op = Op::kExp; n.a = a; n.value = std::move(out);
  return push(std::move(n), "exp");
}

Tape::Id Tape::log(Id a) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::log(v);
  Node n;
  n.op = Op::kLog; n.a = a; n.value = std::move(out);
  return push(std::move(n), "log");
}

Tape::Id Tape::tanh(Id a) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::tanh(v);
  Node n;
  n.op = Op::kTanh; n.a = a; n.value = std::move(out);
  return push(std::move(n), "tanh");
}

Tape::Id Tape::relu(Id a) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
  Node n;
  n.op = Op::kRelu; n.a = a; n.value = std::move(out);
  return push(std::move(n), "relu");
}

Tape::Id Tape::recip(Id a) {
  Tensor out = val(a);
  for (double& v : out.vec()) v = 1.0 / v;
  Node n;
  n.op = Op::kRecip; n.a = a; n.value = std::move(out);
  return push(std::move(n), "recip");
}

Tape::Id Tape::clamp(Id a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  Tensor out = val(a);
  for (double& v : out.vec()) v = std::clamp(v, lo, hi);
  Node n;
  n.op = Op::kClamp; n.a = a; n.s0 = lo; n.s1 = hi; n.value = std::move(out);
  return push(std::move(n), "clamp");
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor &ta = val(a), &tb = val(b);
  require(ta.rank() == 2 && tb.rank() == 2, "matmul: rank-2 tensors required");
  require(ta.dim(1) == tb.dim(0), "matmul: inner dimension mismatch");
  const int64_t M = ta.dim(0), K = ta.dim(1), N = tb.dim(1);
  Tensor out(std::vector<int64_t>{M, N});
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t m = 0; m < M; ++m) {
    double* orow = po + m * N;
    for (int64_t k = 0; k < K; ++k) {
      double x = pa[m * K + k];
      const double* brow = pb + k * N;
      for (int64_t n2 = 0; n2 < N; ++n2) orow[n2] += x * brow[n2];
    }
  }
  Node n;
  n.op = Op::kMatmul; n.a = a; n.b = b; n.value = std::move(out);
  return push(std::move(n), "matmul");
}

Tape::Id Tape::affine(Id x, Id w, Id b) {
  const Tensor &tx = val(x), &tw = val(w), &tb = val(b);
  require(tx.rank() == 2 && tw.rank() == 2, "affine: rank-2 x and w required");
  require(tx.dim(1) == tw.dim(0), "affine: inner dimension mismatch");
  require(tb.size() == tw.dim(1), "affine: bias length mismatch");
  const int64_t B = tx.dim(0), K = tx.dim(1), N = tw.dim(1);
  Tensor out(std::vector<int64_t>{B, N});
  const double* px = tx.data();
  const double* pw = tw.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t r = 0; r < B; ++r) {
    double* orow = po + r * N;
    std::memcpy(orow, pb, static_cast<size_t>(N) * sizeof(double));
    const double* xrow = px + r * K;
    for (int64_t k = 0; k < K; ++k) {
      double xv = xrow[k];
      if (xv == 0.0) continue;  // one-hot observations are mostly zero
      const double* wrow = pw + k * N;
      for (int64_t n2 = 0; n2 < N; ++n2) orow[n2] += xv * wrow[n2];
    }
  }
  Node n;
  n.op = Op::kAffine; n.a = x; n.b = w; n.c = b; n.value = std::move(out);
  return push(std::move(n), "affine");
}

Tape::Id Tape::add_rowvec(Id a, Id v) {
  const Tensor &ta = val(a), &tv = val(v);
  require(ta.rank() == 2, "add_rowvec: rank-2 tensor required");
  require(tv.size() == ta.dim(1), "add_rowvec: length mismatch");
  Tensor out = ta;
  const int64_t B = ta.dim(0), N = ta.dim(1);
  const double* pv = tv.data();
  double* po = out.data();
  for (int64_t r = 0; r < B; ++r)
    for (int64_t j = 0; j < N; ++j) po[r * N + j] += pv[j];
  Node n;
  n.op = Op::kAddRowvec; n.a = a; n.b = v; n.value = std::move(out);
  return push(std::move(n), "add_rowvec");
}

Tape::Id Tape::scale_rows(Id a, Id v) {
  const Tensor &ta = val(a), &tv = val(v);
  require(ta.rank() == 2, "scale_rows: rank-2 tensor required");
  require(tv.size() == ta.dim(0), "scale_rows: length mismatch");
  Tensor out = ta;
  const int64_t B = ta.dim(0), N = ta.dim(1);
  const double* pv = tv.data();
  double* po = out.data();
  for (int64_t r = 0; r < B; ++r)
    for (int64_t j = 0; j < N; ++j) po[r * N + j] *= pv[r];
  Node n;
  n.op = Op::kScaleRows; n.a = a; n.b = v; n.value = std::move(out);
  return push(std::move(n), "scale_rows");
}

Tape::Id Tape::scale_cols(Id a, Id v) {
  const Tensor &ta = val(a), &tv = val(v);
  require(ta.rank() == 2, "scale_cols: rank-2 tensor required");
  require(tv.size() == ta.dim(1), "scale_cols: length mismatch");
  Tensor out = ta;
  const int64_t B = ta.dim(0), N = ta.dim(1);
  const double* pv = tv.data();
  double* po = out.data();
  for (int64_t r = 0; r < B; ++r)
    for (int64_t j = 0; j < N; ++j) po[r * N + j] *= pv[j];
  Node n;
  n.op = Op::kScaleCols; n.a = a; n.b = v; n.value = std::move(out);
  return push(std::move(n), "scale_cols");
}

Tape::Id Tape::gather(Id src, std::shared_ptr<const std::vector<int64_t>> idx,
                      std::vector<int64_t> out_shape) {
  const Tensor& ts = val(src);
  require(ts.rank() == 1, "gather: source must be 1-D");
  require(idx != nullptr, "gather: null index");
  int64_t total = 1;
  for (int64_t d : out_shape) total *= d;
  require(total == static_cast<int64_t>(idx->size()), "gather: index/shape mismatch");
  Tensor out(std::move(out_shape));
  const double* ps = ts.data();
  double* po = out.data();
  const int64_t n_src = ts.size();
  const auto& ix = *idx;
  for (size_t i = 0; i < ix.size(); ++i) {
    require(ix[i] >= 0 && ix[i] < n_src, "gather: index out of range");
    po[i] = ps[ix[i]];
  }
  Node n;
  n.op = Op::kGather; n.a = src; n.idx = std::move(idx); n.value = std::move(out);
  return push(std::move(n), "gather");
}

Tape::Id Tape::gather_cols(Id src, std::shared_ptr<const std::vector<int64_t>> idx) {
  const Tensor& ts = val(src);
  require(ts.rank() == 2, "gather_cols: source must be 2-D");
  require(idx != nullptr, "gather_cols: null index");
  const int64_t B = ts.dim(0), G = ts.dim(1);
  const int64_t N = static_cast<int64_t>(idx->size());
  Tensor out(std::vector<int64_t>{B, N});
  const double* ps = ts.data();
  double* po = out.data();
  const auto& ix = *idx;
  for (int64_t j = 0; j < N; ++j)
    require(ix[static_cast<size_t>(j)] >= 0 && ix[static_cast<size_t>(j)] < G,
            "gather_cols: index out of range");
  for (int64_t r = 0; r < B; ++r) {
    const double* srow = ps + r * G;
    double* orow = po + r * N;
    for (int64_t j = 0; j < N; ++j) orow[j] = srow[ix[static_cast<size_t>(j)]];
  }
  Node n;
  n.op = Op::kGatherCols; n.a = src; n.idx = std::move(idx); n.value = std::move(out);
  return push(std::move(n), "gather_cols");
}

Tape::Id Tape::index_scalar(Id src, int64_t flat_index) {
  const Tensor& ts = val(src);
  require(flat_index >= 0 && flat_index < ts.size(), "index_scalar: index out of range");
  Node n;
  n.op = Op::kIndexScalar; n.a = src; n.flat_index = flat_index;
  n.value = Tensor::scalar(ts.at(flat_index));
  return push(std::move(n), "index_scalar");
}

Tape::Id Tape::prod_reduce(Id a, int axis) {
  const Tensor& ta = val(a);
  AxisSplit sp = split_axis(ta.shape(), axis);
  Tensor out(drop_axis(ta.shape(), axis), 1.0);
  const double* pa = ta.data();
  double* po = out.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t k = 0; k < sp.n; ++k) {
      const double* row = pa + (o * sp.n + k) * sp.inner;
      double* orow = po + o * sp.inner;
      for (int64_t i = 0; i < sp.inner; ++i) orow[i] *= row[i];
    }
  Node n;
  n.op = Op::kProdReduce; n.a = a; n.axis = axis; n.value = std::move(out);
  return push(std::move(n), "prod_reduce");
}

Tape::Id Tape::lse(Id a, int axis, double gamma) {
  require(gamma > 0.0, "lse: gamma must be positive");
  const Tensor& ta = val(a);
  AxisSplit sp = split_axis(ta.shape(), axis);
  Tensor out(drop_axis(ta.shape(), axis));
  const double* pa = ta.data();
  double* po = out.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t i = 0; i < sp.inner; ++i) {
      double m = -1e300;
      for (int64_t k = 0; k < sp.n; ++k)
        m = std::max(m, pa[(o * sp.n + k) * sp.inner + i]);
      double s = 0.0;
      for (int64_t k = 0; k < sp.n; ++k)
        s += std::exp((pa[(o * sp.n + k) * sp.inner + i] - m) / gamma);
      po[o * sp.inner + i] = m + gamma * std::log(s);
    }
  Node n;
  n.op = Op::kLse; n.a = a; n.axis = axis; n.s0 = gamma; n.value = std::move(out);
  return push(std::move(n), "lse");
}

Tape::Id Tape::lse_excess(Id a, int axis, double gamma) {
  require(gamma > 0.0, "lse_excess: gamma must be positive");
  const Tensor& ta = val(a);
  AxisSplit sp = split_axis(ta.shape(), axis);
  Tensor out(drop_axis(ta.shape(), axis));
  const double* pa = ta.data();
  double* po = out.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t i = 0; i < sp.inner; ++i) {
      // m >= 0 guards the subtraction; inputs are valuations in [0, 1+].
      double m = 0.0;
      for (int64_t k = 0; k < sp.n; ++k) {
        double v = pa[(o * sp.n + k) * sp.inner + i];
        require(v >= 0.0, "lse_excess: negative input");
        m = std::max(m, v);
      }
      // e^{y/g} = 1 + sum_k (e^{x_k/g} - 1), factored by e^{m/g}.
      double s = std::exp(-m / gamma) * (1.0 - static_cast<double>(sp.n));
      for (int64_t k = 0; k < sp.n; ++k)
        s += std::exp((pa[(o * sp.n + k) * sp.inner + i] - m) / gamma);
      s = std::max(s, 1e-300);  // cancellation floor; exact zeros handled by m==0
      po[o * sp.inner + i] = m + gamma * std::log(s);
    }
  Node n;
  n.op = Op::kLseExcess; n.a = a; n.axis = axis; n.s0 = gamma; n.value = std::move(out);
  return push(std::move(n), "lse_excess");
}

Tape::Id Tape::softmax(Id a) {
  const Tensor& ta = val(a);
  require(ta.rank() >= 1, "softmax: rank >= 1 required");
  const int64_t N = ta.shape().back();
  const int64_t rows = ta.size() / N;
  Tensor out = ta;
  double* po = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    double* row = po + r * N;
    double m = *std::max_element(row, row + N);
    double s = 0.0;
    for (int64_t j = 0; j < N; ++j) {
      row[j] = std::exp(row[j] - m);
      s += row[j];
    }
    for (int64_t j = 0; j < N; ++j) row[j] /= s;
  }
  Node n;
  n.op = Op::kSoftmax; n.a = a; n.value = std::move(out);
  return push(std::move(n), "softmax");
}

Tape::Id Tape::sum_axis(Id a, int axis) {
  const Tensor& ta = val(a);
  AxisSplit sp = split_axis(ta.shape(), axis);
  Tensor out(drop_axis(ta.shape(), axis));
  const double* pa = ta.data();
  double* po = out.data();
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t k = 0; k < sp.n; ++k) {
      const double* row = pa + (o * sp.n + k) * sp.inner;
      double* orow = po + o * sp.inner;
      for (int64_t i = 0; i < sp.inner; ++i) orow[i] += row[i];
    }
  Node n;
  n.op = Op::kSumAxis; n.a = a; n.axis = axis; n.value = std::move(out);
  return push(std::move(n), "sum_axis");
}

Tape::Id Tape::sum_all(Id a) {
  const Tensor& ta = val(a);
  double s = 0.0;
  for (double v : ta.vec()) s += v;
  Node n;
  n.op = Op::kSumAll; n.a = a; n.value = Tensor::scalar(s);
  return push(std::move(n), "sum_all");
}

Tape::Id Tape::mean_all(Id a) {
  const Tensor& ta = val(a);
  double s = 0.0;
  for (double v : ta.vec()) s += v;
  Node n;
  n.op = Op::kMeanAll; n.a = a;
  n.value = Tensor::scalar(s / static_cast<double>(ta.size()));
  return push(std::move(n), "mean_all");
}

Tape::Id Tape::stack(const std::vector<Id>& xs) {
  require(!xs.empty(), "stack: empty input list");
  const Tensor& first = val(xs[0]);
  std::vector<int64_t> out_shape;
  out_shape.push_back(static_cast<int64_t>(xs.size()));
  for (int64_t d : first.shape()) out_shape.push_back(d);
  Tensor out(std::move(out_shape));
  const int64_t block = first.size();
  double* po = out.data();
  for (size_t i = 0; i < xs.size(); ++i) {
    const Tensor& t = val(xs[i]);
    require(t.same_shape(first), "stack: shape mismatch");
    std::memcpy(po + static_cast<int64_t>(i) * block, t.data(),
                static_cast<size_t>(block) * sizeof(double));
  }
  Node n;
  n.op = Op::kStack; n.list = xs; n.value = std::move(out);
  return push(std::move(n), "stack");
}

Tape::Id Tape::reshape(Id a, std::vector<int64_t> shape) {
  const Tensor& ta = val(a);
  int64_t total = 1;
  for (int64_t d : shape) total *= d;
  require(total == ta.size(), "reshape: element count mismatch");
  Node n;
  n.op = Op::kReshape; n.a = a;
  n.value = Tensor::from(std::move(shape), ta.vec());
  return push(std::move(n), "reshape");
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::accumulate(Id id, const Tensor& g) {
  size_t i = static_cast<size_t>(id);
  if (!needs_[i]) return;
  if (!has_grad_[i]) {
    grads_[i] = g;
    has_grad_[i] = 1;
    return;
  }
  double* pa = grads_[i].data();
  const double* pg = g.data();
  for (int64_t k = 0; k < g.size(); ++k) pa[k] += pg[k];
}

void Tape::backward(Id seed) {
  require(!backward_done_, "backward() may be called once per tape");
  require(val(seed).size() == 1, "backward: seed must be scalar");
  backward_done_ = true;
  grads_.resize(nodes_.size());
  has_grad_.assign(nodes_.size(), 0);
  needs_.assign(nodes_.size(), 0);
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::kLeaf) {
      needs_[i] = 1;
      continue;
    }
    if (n.op == Op::kConstLeaf) continue;
    uint8_t v = 0;
    if (n.a >= 0) v |= needs_[static_cast<size_t>(n.a)];
    if (n.b >= 0) v |= needs_[static_cast<size_t>(n.b)];
    if (n.c >= 0) v |= needs_[static_cast<size_t>(n.c)];
    for (Id id : n.list) v |= needs_[static_cast<size_t>(id)];
    needs_[i] = v;
  }
  grads_[static_cast<size_t>(seed)] = Tensor::scalar(1.0);
  has_grad_[static_cast<size_t>(seed)] = 1;
  for (size_t i = static_cast<size_t>(seed) + 1; i-- > 0;) {
    if (!has_grad_[i] || !needs_[i]) continue;
    const Op op = nodes_[i].op;
    if (op == Op::kLeaf || op == Op::kConstLeaf) continue;
    backward_node(i);
  }
}

const Tensor& Tape::grad(Id id) const {
  require(backward_done_, "grad(): backward() not run");
  require(has_grad_[static_cast<size_t>(id)], "grad(): node unreachable from seed");
  return grads_[static_cast<size_t>(id)];
}

bool Tape::has_grad(Id id) const {
  return backward_done_ && has_grad_[static_cast<size_t>(id)] != 0;
}

void Tape::backward_node(size_t i) {
  const Node& n = nodes_[i];
  const Tensor& g = grads_[i];
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstLeaf:
      break;
    case Op::kAdd: {
      accumulate(n.a, g);
      accumulate(n.b, g);
      break;
    }
    case Op::kSub: {
      accumulate(n.a, g);
      Tensor gb = g;
      for (double& v : gb.vec()) v = -v;
      accumulate(n.b, gb);
      break;
    }
    case Op::kMul: {
      const Tensor &ta = val(n.a), &tb = val(n.b);
      Tensor ga = g, gb = g;
      double* pga = ga.data();
      double* pgb = gb.data();
      for (int64_t k = 0; k < g.size(); ++k) {
        pga[k] *= tb.at(k);
        pgb[k] *= ta.at(k);
      }
      accumulate(n.a, ga);
      accumulate(n.b, gb);
      break;
    }
    case Op::kMinimum: {
      const Tensor &ta = val(n.a), &tb = val(n.b);
      Tensor ga = g, gb = g;
      for (int64_t k = 0; k < g.size(); ++k) {
        if (ta.at(k) <= tb.at(k)) gb.at(k) = 0.0;  // ties go to the first arg
        else ga.at(k) = 0.0;
      }
      accumulate(n.a, ga);
      accumulate(n.b, gb);
      break;
    }
    case Op::kLogAddExp: {
      const Tensor &ta = val(n.a), &tb = val(n.b);
      const double gamma = n.s0;
      Tensor ga = g, gb = g;
      for (int64_t k = 0; k < g.size(); ++k) {
        double y = n.value.at(k);
        ga.at(k) *= std::exp((ta.at(k) - y) / gamma);
        gb.at(k) *= std::exp((tb.at(k) - y) / gamma);
      }
      accumulate(n.a, ga);
      accumulate(n.b, gb);
      break;
    }
    case Op::kAddScalar: {
      accumulate(n.a, g);
      break;
    }
    case Op::kMulScalar: {
      Tensor ga = g;
      for (double& v : ga.vec()) v *= n.s0;
      accumulate(n.a, ga);
      break;
    }
    case Op::kMinScalar: {
      const Tensor& ta = val(n.a);
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k)
        if (ta.at(k) > n.s0) ga.at(k) = 0.0;  // boundary passes through
      accumulate(n.a, ga);
      break;
    }
    case Op::kMaxScalar: {
      const Tensor& ta = val(n.a);
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k)
        if (ta.at(k) < n.s0) ga.at(k) = 0.0;
      accumulate(n.a, ga);
      break;
    }
    case Op::kMulNode1: {
      double k = val(n.b).at(0);
      Tensor ga = g;
      for (double& v : ga.vec()) v *= k;
      accumulate(n.a, ga);
      const Tensor& ta = val(n.a);
      double s = 0.0;
      for (int64_t j = 0; j < g.size(); ++j) s += g.at(j) * ta.at(j);
      accumulate(n.b, Tensor::scalar(s));
      break;
    }
    case Op::kExp: {
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k) ga.at(k) *= n.value.at(k);
      accumulate(n.a, ga);
      break;
    }
    case Op::kLog: {
      const Tensor& ta = val(n.a);
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k) ga.at(k) /= ta.at(k);
      accumulate(n.a, ga);
      break;
    }
    case Op::kTanh: {
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k) {
        double y = n.value.at(k);
        ga.at(k) *= 1.0 - y * y;
      }
      accumulate(n.a, ga);
      break;
    }
    case Op::kRelu: {
      const Tensor& ta = val(n.a);
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k)
        if (ta.at(k) <= 0.0) ga.at(k) = 0.0;
      accumulate(n.a, ga);
      break;
    }
    case Op::kRecip: {
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k) {
        double y = n.value.at(k);
        ga.at(k) *= -y * y;
      }
      accumulate(n.a, ga);
      break;
    }
    case Op::kClamp: {
      const Tensor& ta = val(n.a);
      Tensor ga = g;
      for (int64_t k = 0; k < g.size(); ++k) {
        double x = ta.at(k);
        if (x < n.s0 || x > n.s1) ga.at(k) = 0.0;  // pass-through at the boundary
      }
      accumulate(n.a, ga);
      break;
    }
    case Op::kMatmul: {
      const Tensor &ta = val(n.a), &tb = val(n.b);
      const int64_t M = ta.dim(0), K = ta.dim(1), N = tb.dim(1);
      const double* pg = g.data();
      const double* pa = ta.data();
      const double* pb = tb.data();
      if (needs(n.a)) {
        Tensor ga(std::vector<int64_t>{M, K});
        double* pga = ga.data();
        for (int64_t m = 0; m < M; ++m)
          for (int64_t k = 0; k < K; ++k) {
            const double* grow = pg + m * N;
            const double* brow = pb + k * N;
            double s = 0.0;
            for (int64_t n2 = 0; n2 < N; ++n2) s += grow[n2] * brow[n2];
            pga[m * K + k] = s;
          }
        accumulate(n.a, ga);
      }
      if (needs(n.b)) {
        Tensor gb(std::vector<int64_t>{K, N});
        double* pgb = gb.data();
        for (int64_t m = 0; m < M; ++m) {
          const double* grow = pg + m * N;
          for (int64_t k = 0; k < K; ++k) {
            double x = pa[m * K + k];
            if (x == 0.0) continue;
            double* gbrow = pgb + k * N;
            for (int64_t n2 = 0; n2 < N; ++n2) gbrow[n2] += x * grow[n2];
          }
        }
        accumulate(n.b, gb);
      }
      break;
    }
    case Op::kAffine: {
      const Tensor &tx = val(n.a), &tw = val(n.b);
      const int64_t B = tx.dim(0), K = tx.dim(1), N = tw.dim(1);
      const bool need_x = needs(n.a);
      Tensor gx(std::vector<int64_t>{need_x ? B : 1, need_x ? K : 1});
      Tensor gw(std::vector<int64_t>{K, N});
      Tensor gb(std::vector<int64_t>{N});
      const double* pg = g.data();
      const double* px = tx.data();
      const double* pw = tw.data();
      double* pgx = gx.data();
      double* pgw = gw.data();
      double* pgb = gb.data();
      for (int64_t r = 0; r < B; ++r) {
        const double* grow = pg + r * N;
        const double* xrow = px + r * K;
        for (int64_t j = 0; j < N; ++j) pgb[j] += grow[j];
        if (need_x) {
          double* gxrow = pgx + r * K;
          for (int64_t k = 0; k < K; ++k) {
            const double* wrow = pw + k * N;
            double s = 0.0;
            for (int64_t j = 0; j < N; ++j) s += grow[j] * wrow[j];
            gxrow[k] = s;
          }
        }
        for (int64_t k = 0; k < K; ++k) {
          double xv = xrow[k];
          if (xv != 0.0) {
            double* gwrow = pgw + k * N;
            for (int64_t j = 0; j < N; ++j) gwrow[j] += xv * grow[j];
          }
        }
      }
      if (need_x) accumulate(n.a, gx);
      accumulate(n.b, gw);
      accumulate(n.c, gb);
      break;
    }
    case Op::kAddRowvec: {
      accumulate(n.a, g);
      const int64_t B = g.dim(0), N = g.dim(1);
      Tensor gv(std::vector<int64_t>{N});
      for (int64_t r = 0; r < B; ++r)
        for (int64_t j = 0; j < N; ++j) gv.at(j) += g.at2(r, j);
      accumulate(n.b, gv);
      break;
    }
    case Op::kScaleRows: {
      const Tensor &ta = val(n.a), &tv = val(n.b);
      const int64_t B = g.dim(0), N = g.dim(1);
      Tensor ga = g;
      Tensor gv(std::vector<int64_t>{B});
      for (int64_t r = 0; r < B; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < N; ++j) {
          s += g.at2(r, j) * ta.at2(r, j);
          ga.at2(r, j) *= tv.at(r);
        }
        gv.at(r) = s;
      }
      accumulate(n.a, ga);
      accumulate(n.b, gv);
      break;
    }
    case Op::kScaleCols: {
      const Tensor &ta = val(n.a), &tv = val(n.b);
      const int64_t B = g.dim(0), N = g.dim(1);
      Tensor ga = g;
      Tensor gv(std::vector<int64_t>{N});
      for (int64_t r = 0; r < B; ++r)
        for (int64_t j = 0; j < N; ++j) {
          gv.at(j) += g.at2(r, j) * ta.at2(r, j);
          ga.at2(r, j) *= tv.at(j);
        }
      accumulate(n.a, ga);
      accumulate(n.b, gv);
      break;
    }
    case Op::kGather: {
      const Tensor& ts = val(n.a);
      Tensor ga(std::vector<int64_t>{ts.size()});
      const auto& ix = *n.idx;
      for (size_t k = 0; k < ix.size(); ++k)
        ga.at(ix[k]) += g.at(static_cast<int64_t>(k));
      accumulate(n.a, ga);
      break;
    }
    case Op::kGatherCols: {
      const Tensor& ts = val(n.a);
      const int64_t B = ts.dim(0), G = ts.dim(1);
      const auto& ix = *n.idx;
      const int64_t N = static_cast<int64_t>(ix.size());
      Tensor ga(std::vector<int64_t>{B, G});
      for (int64_t r = 0; r < B; ++r) {
        double* garow = ga.data() + r * G;
        const double* grow = g.data() + r * N;
        for (int64_t j = 0; j < N; ++j) garow[ix[static_cast<size_t>(j)]] += grow[j];
      }
      accumulate(n.a, ga);
      break;
    }
    case Op::kIndexScalar: {
      const Tensor& ts = val(n.a);
      Tensor ga(ts.shape());
      ga.at(n.flat_index) = g.at(0);
      accumulate(n.a, ga);
      break;
    }
    case Op::kProdReduce: {
      const Tensor& ta = val(n.a);
      AxisSplit sp = split_axis(ta.shape(), n.axis);
      Tensor ga(ta.shape());
      // Exclusive products via prefix/suffix scans; correct with zeros.
      std::vector<double> prefix(static_cast<size_t>(sp.n + 1));
      std::vector<double> suffix(static_cast<size_t>(sp.n + 1));
      for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
          prefix[0] = 1.0;
          for (int64_t k = 0; k < sp.n; ++k)
            prefix[static_cast<size_t>(k + 1)] =
                prefix[static_cast<size_t>(k)] * ta.at((o * sp.n + k) * sp.inner + i);
          suffix[static_cast<size_t>(sp.n)] = 1.0;
          for (int64_t k = sp.n; k-- > 0;)
            suffix[static_cast<size_t>(k)] =
                suffix[static_cast<size_t>(k + 1)] * ta.at((o * sp.n + k) * sp.inner + i);
          double go = g.at(o * sp.inner + i);
          for (int64_t k = 0; k < sp.n; ++k)
            ga.at((o * sp.n + k) * sp.inner + i) =
                go * prefix[static_cast<size_t>(k)] * suffix[static_cast<size_t>(k + 1)];
        }
      accumulate(n.a, ga);
      break;
    }
    case Op::kLse:
    case Op::kLseExcess: {
      const Tensor& ta = val(n.a);
      const double gamma = n.s0;
      AxisSplit sp = split_axis(ta.shape(), n.axis);
      Tensor ga(ta.shape());
      // Both forms share d/dx_k = exp((x_k - y)/gamma).
      for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
          double y = n.value.at(o * sp.inner + i);
          double go = g.at(o * sp.inner + i);
          for (int64_t k = 0; k < sp.n; ++k) {
            double x = ta.at((o * sp.n + k) * sp.inner + i);
            ga.at((o * sp.n + k) * sp.inner + i) = go * std::exp((x - y) / gamma);
          }
        }
      accumulate(n.a, ga);
      break;
    }
    case Op::kSoftmax: {
      const int64_t N = n.value.shape().back();
      const int64_t rows = n.value.size() / N;
      Tensor ga(val(n.a).shape());
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = n.value.data() + r * N;
        const double* gy = g.data() + r * N;
        double dot = 0.0;
        for (int64_t j = 0; j < N; ++j) dot += gy[j] * y[j];
        double* gar = ga.data() + r * N;
        for (int64_t j = 0; j < N; ++j) gar[j] = y[j] * (gy[j] - dot);
      }
      accumulate(n.a, ga);
      break;
    }
    case Op::kSumAxis: {
      const Tensor& ta = val(n.a);
      AxisSplit sp = split_axis(ta.shape(), n.axis);
      Tensor ga(ta.shape());
      for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t k = 0; k < sp.n; ++k)
          for (int64_t i = 0; i < sp.inner; ++i)
            ga.at((o * sp.n + k) * sp.inner + i) = g.at(o * sp.inner + i);
      accumulate(n.a, ga);
      break;
    }
    case Op::kSumAll: {
      const Tensor& ta = val(n.a);
      Tensor ga(ta.shape(), g.at(0));
      accumulate(n.a, ga);
      break;
    }
    case Op::kMeanAll: {
      const Tensor& ta = val(n.a);
      Tensor ga(ta.shape(), g.at(0) / static_cast<double>(ta.size()));
      accumulate(n.a, ga);
      break;
    }
    case Op::kStack: {
      const int64_t block = val(n.list[0]).size();
      for (size_t k = 0; k < n.list.size(); ++k) {
        Tensor gk(val(n.list[k]).shape());
        std::memcpy(gk.data(), g.data() + static_cast<int64_t>(k) * block,
                    static_cast<size_t>(block) * sizeof(double));
        accumulate(n.list[k], gk);
      }
      break;
    }
    case Op::kReshape: {
      const Tensor& ta = val(n.a);
      accumulate(n.a, Tensor::from(ta.shape(), g.vec()));
      break;
    }
  }
}

}  // namespace hyrl::grad
