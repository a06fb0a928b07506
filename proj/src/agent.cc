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

#include "dialrl/agent.h"

#include <algorithm>

#include "dialrl/errors.h"

namespace dialrl {

int Argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

int UniformAllowedAction(int num_actions, const std::vector<int>& excluded, Rng& rng) {
  if (excluded.empty()) return UniformInt(rng, num_actions);
  std::vector<int> allowed;
  for (int a = 0; a < num_actions; ++a) {
    if (std::find(excluded.begin(), excluded.end(), a) == excluded.end()) allowed.push_back(a);
  }
  return allowed[UniformInt(rng, static_cast<int>(allowed.size()))];
}

void ValidateExcluded(int num_actions, const std::vector<int>& excluded) {
  std::vector<bool> hit(num_actions, false);
  int count = 0;
  for (int a : excluded) {
    if (a < 0 || a >= num_actions) throw ConfigError("excluded action " + std::to_string(a) + " out of range");
    if (!hit[a]) ++count;
    hit[a] = true;
  }
  if (count >= num_actions) throw ConfigError("exploration excludes every action");
}

void CheckLayout(const std::vector<std::string>& expected, const std::vector<std::string>& actual,
                 const std::string& what) {
  if (expected == actual) return;
  std::string diff = what + ": feature layout mismatch (expected " + std::to_string(expected.size()) +
                     " features, got " + std::to_string(actual.size()) + ")";
  int shown = 0;
  for (size_t i = 0; i < std::max(expected.size(), actual.size()) && shown < 5; ++i) {
    const std::string e = i < expected.size() ? expected[i] : "<none>";
    const std::string a = i < actual.size() ? actual[i] : "<none>";
    if (e != a) {
      diff += "; [" + std::to_string(i) + "] " + e + " != " + a;
      ++shown;
    }
  }
  throw ShapeError(diff);
}

}  // namespace dialrl
