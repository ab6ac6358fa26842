/*
 * Copyright 2026 The SImpAl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "simpal/rng.hpp"

namespace simpal {
namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

Rng make_stream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{lo(seed), hi(seed), lo(tag), hi(tag)};
  return Rng(seq);
}

Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{lo(seed), hi(seed), lo(tag), hi(tag), lo(index), hi(index)};
  return Rng(seq);
}

}  // namespace simpal
