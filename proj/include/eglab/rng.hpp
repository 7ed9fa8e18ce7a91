/*
 * Copyright 2026 The entropy-gain-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EGLAB_RNG_HPP_
#define EGLAB_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace eglab {

// Counter-based generator (SplitMix64 stream). Each (seed, stream) pair is an
// independent deterministic stream, so per-trial streams give results that do
// not depend on the number of worker threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) {
    key_ = Mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    key_ = Mix(key_ ^ stream);
  }

  std::uint64_t NextU64() { return Mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform on (0, 1]; never returns 0 so log() is safe.
  double Uniform() {
    return static_cast<double>((NextU64() >> 11) + 1) * (1.0 / 9007199254740992.0);
  }

  double Normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = Uniform();
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t Mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace eglab

#endif  // EGLAB_RNG_HPP_
