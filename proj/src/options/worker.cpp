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

#include "hyrl/options/worker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "hyrl/util/binio.hpp"
#include "hyrl/util/digest.hpp"
#include "hyrl/util/io.hpp"
#include "json.hpp"

namespace hyrl::options {
namespace {

using util::put_f64;
using util::put_u32;
using util::put_u64;
using util::put_u8;

constexpr char kMagic[8] = {'H', 'Y', 'R', 'L', 'C', 'K', 'P', '1'};
constexpr uint32_t kFormatVersion = 1;

std::vector<double> mlp_infer(const grad::Mlp& net, const grad::Tensor& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const grad::Linear& l = net.layers[li];
    int64_t in = l.w.shape()[0], out = l.w.shape()[1];
    if (static_cast<int64_t>(h.size()) != in) {
      throw std::invalid_argument("worker input size " + std::to_string(h.size()) +
                                  " does not match layer input " + std::to_string(in));
    }
    std::vector<double> o(static_cast<size_t>(out));
    for (int64_t j = 0; j < out; ++j) o[static_cast<size_t>(j)] = l.b.at(j);
    const double* w = l.w.data();
    for (int64_t i = 0; i < in; ++i) {
      double hv = h[static_cast<size_t>(i)];
      if (hv == 0.0) continue;
      const double* row = w + i * out;
      for (int64_t j = 0; j < out; ++j) o[static_cast<size_t>(j)] += hv * row[j];
    }
    if (li + 1 < net.layers.size())
      for (double& v : o) v = std::tanh(v);
    h = std::move(o);
  }
  return h;
}

}  // namespace

std::array<double, 4> OptionWorker::action_gaussian(const grad::Tensor& x) const {
  std::vector<double> p = action_probs(x);
  int best = 0;
  for (size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = static_cast<int>(i);
  auto [ax, ay] = env::inverse_map(best);
  return {ax, ay, kContinuousLogStd, kContinuousLogStd};
}

NeuralWorker::NeuralWorker(std::string option_id, env::ActionSpace space,
                           grad::Mlp net, uint64_t training_digest)
    : OptionWorker(std::move(option_id), space),
      net_(std::move(net)),
      training_digest_(training_digest) {
  if (net_.layers.empty()) throw std::invalid_argument("neural worker needs layers");
  if (net_.layers.back().w.shape()[1] != env::kNumActions) {
    throw std::invalid_argument("worker head must emit one logit per action");
  }
}

std::vector<double> NeuralWorker::action_probs(const grad::Tensor& x) const {
  std::vector<double> logits = mlp_infer(net_, x);
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : logits) v /= z;
  return logits;
}

uint64_t NeuralWorker::param_digest() const {
  uint64_t h = util::fnv1a(option_id());
  for (const grad::Linear& l : net_.layers) {
    h = util::fnv1a(l.w.data(), static_cast<size_t>(l.w.size()) * 8, h);
    h = util::fnv1a(l.b.data(), static_cast<size_t>(l.b.size()) * 8, h);
  }
  return h;
}

void save_worker(const OptionWorker& w, const std::string& path) {
  std::string s(kMagic, 8);
  put_u32(s, kFormatVersion);
  bool neural = w.kind() == "neural";
  put_u8(s, neural ? 1 : 0);
  put_u8(s, w.action_space() == env::ActionSpace::kContinuous ? 1 : 0);
  if (w.option_id().size() > 0xffff) throw std::invalid_argument("option_id too long");
  put_u32(s, static_cast<uint32_t>(w.option_id().size()));
  s += w.option_id();
  if (neural) {
    const auto& nw = dynamic_cast<const NeuralWorker&>(w);
    put_u64(s, nw.training_digest());
    const grad::Mlp& net = nw.net();
    put_u32(s, static_cast<uint32_t>(net.layers.size()));
    for (const grad::Linear& l : net.layers) {
      put_u32(s, static_cast<uint32_t>(l.w.shape()[0]));
      put_u32(s, static_cast<uint32_t>(l.w.shape()[1]));
      for (int64_t i = 0; i < l.w.size(); ++i) put_f64(s, l.w.at(i));
      for (int64_t i = 0; i < l.b.size(); ++i) put_f64(s, l.b.at(i));
    }
  } else {
    put_u64(s, 0);
  }
  put_u64(s, util::fnv1a(s.data(), s.size()));
  util::write_file(path, s);
}

std::unique_ptr<OptionWorker> load_worker(const std::string& path) {
  std::string buf = util::read_file(path);
  if (buf.size() < 8 + 4 + 8 || std::memcmp(buf.data(), kMagic, 8) != 0) {
    throw std::runtime_error("not a worker checkpoint: " + path);
  }
  uint64_t want = util::fnv1a(buf.data(), buf.size() - 8);
  util::BinReader tail(buf, buf.size() - 8);
  if (tail.u64() != want) throw std::runtime_error("corrupt worker checkpoint: " + path);

  util::BinReader r(buf, 8);
  uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  uint8_t kind = r.u8();
  env::ActionSpace space =
      r.u8() ? env::ActionSpace::kContinuous : env::ActionSpace::kDiscrete;
  std::string id = r.str();
  uint64_t digest = r.u64();
  if (kind == 0) {
    auto w = make_scripted_worker(id, space);
    return w;
  }
  grad::Mlp net;
  uint32_t layers = r.u32();
  for (uint32_t li = 0; li < layers; ++li) {
    int64_t in = r.u32(), out = r.u32();
    grad::Linear l;
    l.w = grad::Tensor({in, out});
    l.b = grad::Tensor({out});
    for (int64_t i = 0; i < in * out; ++i) l.w.data()[i] = r.f64();
    for (int64_t i = 0; i < out; ++i) l.b.data()[i] = r.f64();
    net.layers.push_back(std::move(l));
  }
  return std::make_unique<NeuralWorker>(id, space, std::move(net), digest);
}

void save_registry(const std::map<std::string, std::string>& entries,
                   const std::string& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, ckpt] : entries) j[id] = ckpt;
  util::write_file(path, j.dump(2) + "\n");
}

WorkerSet load_worker_set(const std::string& registry_path) {
  nlohmann::json j = nlohmann::json::parse(util::read_file(registry_path));
  std::filesystem::path base = std::filesystem::path(registry_path).parent_path();
  WorkerSet out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::filesystem::path p(it.value().get<std::string>());
    if (p.is_relative()) p = base / p;
    auto w = load_worker(p.string());
    if (w->option_id() != it.key()) {
      throw std::runtime_error("registry id '" + it.key() +
                               "' does not match checkpoint id '" + w->option_id() + "'");
    }
    out.emplace(it.key(), std::shared_ptr<const OptionWorker>(std::move(w)));
  }
  return out;
}

std::vector<std::string> rule_head_options(const logic::Program& p) {
  std::vector<std::string> heads;
  for (const logic::Clause& c : p.clauses) {
    const std::string& name = p.predicates[static_cast<size_t>(c.head.pred)].name;
    if (std::find(heads.begin(), heads.end(), name) == heads.end())
      heads.push_back(name);
  }
  return heads;
}

void validate_worker_coverage(const std::vector<std::string>& heads,
                              const WorkerSet& workers) {
  for (const std::string& h : heads) {
    if (!workers.count(h)) {
      throw std::invalid_argument("no registered worker for option '" + h + "'");
    }
  }
}

WorkerSet scripted_worker_set(const std::string& env_id, env::ActionSpace space) {
  static const std::map<std::string, std::vector<std::string>> kOptions = {
      {"minikangaroo", {"ascend", "deal_with_enemy"}},
      {"miniseaquest", {"get_air", "get_diver", "deliver_diver", "shoot_enemy"}},
      {"minidonkeykong", {"climb", "jump_barrel", "use_hammer"}},
  };
  auto it = kOptions.find(env_id);
  if (it == kOptions.end()) throw std::invalid_argument("unknown env_id '" + env_id + "'");
  WorkerSet out;
  for (const std::string& id : it->second) {
    out.emplace(id, std::shared_ptr<const OptionWorker>(make_scripted_worker(id, space)));
  }
  return out;
}

}  // namespace hyrl::options
