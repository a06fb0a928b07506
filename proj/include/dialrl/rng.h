// Copyright 2026 The dialrl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIALRL_RNG_H_
#define DIALRL_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dialrl {

// Every stochastic component draws from an explicitly passed stream; there is
// no global generator.
using Rng = std::mt19937_64;

// Mixes a base seed with a stream identifier (splitmix64 finalizer) so that
// training, evaluation and corpus streams never overlap.
uint64_t DeriveSeed(uint64_t base, uint64_t stream);

double Uniform01(Rng& rng);
double UniformReal(Rng& rng, double lo, double hi);
// Uniform integer in [0, n).
int UniformInt(Rng& rng, int n);
bool Bernoulli(Rng& rng, double p);
// Samples an index with probability proportional to weights (all >= 0, some > 0).
int SampleCategorical(Rng& rng, const std::vector<double>& weights);

std::string SerializeRng(const Rng& rng);
Rng DeserializeRng(const std::string& state);

}  // namespace dialrl

#endif  // DIALRL_RNG_H_
