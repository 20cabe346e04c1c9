// Copyright 2026 The ctxbandit Authors. All Rights Reserved.
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

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ctxbandit {

using Stream = std::mt19937_64;

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Seed of the substream identified by (master seed, trial, round, purpose).
// Distinct purposes ("context", "noise", "features", ...) never share draws, so
// adding a consumer to one purpose does not perturb the others.
inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial,
                                           std::uint64_t round, std::string_view label) {
  std::uint64_t h = detail::splitmix64(master);
  h = detail::splitmix64(h ^ trial);
  h = detail::splitmix64(h ^ round);
  return detail::splitmix64(h ^ detail::fnv1a(label));
}

inline Stream make_stream(std::uint64_t master, std::uint64_t trial, std::uint64_t round,
                          std::string_view label) {
  return Stream(stream_seed(master, trial, round, label));
}

}  // namespace ctxbandit
