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

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace simpal {

using Rng = std::mt19937_64;

// Independent generator for a named component ("data", "init", "batching",
// "proxy_a", ...) derived from one experiment seed.
Rng make_stream(std::uint64_t seed, std::string_view name);

// Same, with an extra index for families of streams (one per head, domain...).
Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index);

}  // namespace simpal
