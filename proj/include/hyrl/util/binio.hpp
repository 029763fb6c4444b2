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

#ifndef HYRL_UTIL_BINIO_HPP_
#define HYRL_UTIL_BINIO_HPP_

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace hyrl::util {

// Little-endian append/read helpers for the versioned checkpoint formats.

inline void put_u8(std::string& s, uint8_t v) { s.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& s, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(s, bits);
}

inline void put_str(std::string& s, const std::string& v) {
  if (v.size() > 0xffffffffu) throw std::invalid_argument("string too long");
  put_u32(s, static_cast<uint32_t>(v.size()));
  s += v;
}

class BinReader {
 public:
  explicit BinReader(const std::string& buf, size_t pos = 0) : buf_(buf), pos_(pos) {}

  size_t pos() const { return pos_; }
  void seek(size_t pos) { pos_ = pos; }

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf_[pos_++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }

 private:
  void need(size_t n) const {
    if (pos_ + n > buf_.size()) throw std::runtime_error("truncated checkpoint data");
  }
  const std::string& buf_;
  size_t pos_;
};

}  // namespace hyrl::util

#endif  // HYRL_UTIL_BINIO_HPP_
