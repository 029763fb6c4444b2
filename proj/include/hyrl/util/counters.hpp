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

#ifndef HYRL_UTIL_COUNTERS_HPP_
#define HYRL_UTIL_COUNTERS_HPP_

#include <atomic>
#include <cstdint>

namespace hyrl::util {

// Process-wide instrumentation. Purity checks (e.g. "posttraining performs no
// symbolic reads and no reasoner calls") snapshot these before a stage and
// assert a zero delta afterwards.
struct Counters {
  std::atomic<uint64_t> symbolic_fact_extractions{0};
  std::atomic<uint64_t> reasoner_forward_calls{0};
  std::atomic<uint64_t> reasoner_step_calls{0};
  std::atomic<uint64_t> exact_chain_calls{0};

  static Counters& instance() {
    static Counters c;
    return c;
  }
};

struct CounterSnapshot {
  uint64_t symbolic_fact_extractions;
  uint64_t reasoner_forward_calls;
  uint64_t reasoner_step_calls;
  uint64_t exact_chain_calls;
};

inline CounterSnapshot snapshot_counters() {
  auto& c = Counters::instance();
  return {c.symbolic_fact_extractions.load(), c.reasoner_forward_calls.load(),
          c.reasoner_step_calls.load(), c.exact_chain_calls.load()};
}

// True when no symbolic or reasoner activity happened since `before`.
inline bool pure_neural_since(const CounterSnapshot& before) {
  CounterSnapshot now = snapshot_counters();
  return now.symbolic_fact_extractions == before.symbolic_fact_extractions &&
         now.reasoner_forward_calls == before.reasoner_forward_calls &&
         now.reasoner_step_calls == before.reasoner_step_calls;
}

}  // namespace hyrl::util

#endif  // HYRL_UTIL_COUNTERS_HPP_
