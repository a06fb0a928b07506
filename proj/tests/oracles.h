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

// Reference computations shared by the unit tests and the acceptance binary:
// central finite differences, dense GP regression, brute-force grid lookup
// a chi-square quantile and a random belief generator.

#ifndef DIALRL_TESTS_ORACLES_H_
#define DIALRL_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "dialrl/gpsarsa.h"
#include "dialrl/numerics.h"
#include "dialrl/tracker.h"

namespace dialrl::oracle {

// |a - b| / max(|a|, |b|, floor).
inline double RelativeError(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest relative error between the analytic gradient and central
// differences of objective() over every parameter of net. The objective reads
// the net through the reference it was bound to.
inline double MaxGradientError(FeedForwardNet& net, const GradientSet& analytic,
                               const std::function<double()>& objective, double h = 1e-5,
                               double floor = 1e-6) {
  double worst = 0.0;
  for (size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    const auto& g = analytic.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      double& w = layer.weights.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = objective();
      w = saved - h;
      const double down = objective();
      w = saved;
      worst = std::max(worst, RelativeError(g.weights.data()[i], (up - down) / (2 * h), floor));
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      double& b = layer.bias(i);
      const double saved = b;
      b = saved + h;
      const double up = objective();
      b = saved - h;
      const double down = objective();
      b = saved;
      worst = std::max(worst, RelativeError(g.bias(i), (up - down) / (2 * h), floor));
    }
  }
  return worst;
}

// Posterior mean of exact GP regression at the query points.
inline Eigen::VectorXd DenseGpMean(const KernelSpec& spec, const std::vector<GpPoint>& train,
                                   const Eigen::VectorXd& y, const std::vector<GpPoint>& query) {
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = Kernel(spec, train[i], train[j]);
  }
  k.diagonal().array() += spec.noise_variance;
  const Eigen::VectorXd alpha = k.ldlt().solve(y);
  Eigen::VectorXd out(static_cast<Eigen::Index>(query.size()));
  for (size_t q = 0; q < query.size(); ++q) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m += Kernel(spec, query[q], train[i]) * alpha(i);
    out(static_cast<Eigen::Index>(q)) = m;
  }
  return out;
}

// Squared distance from phi(p) to the span of phi(dictionary), by least
// squares on the Gram system.
inline double ProjectionResidual(const KernelSpec& spec, const std::vector<GpPoint>& dict, const GpPoint& p) {
  const Eigen::Index n = static_cast<Eigen::Index>(dict.size());
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd kp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kp(i) = Kernel(spec, dict[i], p);
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = Kernel(spec, dict[i], dict[j]);
  }
  const Eigen::VectorXd a = k.completeOrthogonalDecomposition().solve(kp);
  return Kernel(spec, p, p) - 2.0 * a.dot(kp) + a.dot(k * a);
}

// Grid entry nearest to (p1, p2) by enumeration; lowest index on ties.
inline int BruteNearestConstraint(double p1, double p2) {
  std::vector<double> d;
  for (const auto& [g1, g2] : Grids::kConstraint) d.push_back((p1 - g1) * (p1 - g1) + (p2 - g2) * (p2 - g2));
  return static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin());
}

inline int BruteNearestRequest(double p) {
  std::vector<double> d;
  for (double g : Grids::kRequest) d.push_back(std::abs(p - g));
  return static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin());
}

// Summary vector assembled from sorted masses and the enumerating lookups.
inline Features BruteSummary(const BeliefState& b) {
  Features out = Features::Zero(kSummarySize);
  int block = 0;
  for (const auto& mass : b.value_mass) {
    std::vector<double> sorted = mass;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double p1 = sorted.empty() ? 0.0 : sorted[0];
    const double p2 = sorted.size() < 2 ? 0.0 : sorted[1];
    out(block++ * kSummaryBlockSize + BruteNearestConstraint(p1, p2)) = 1.0;
  }
  for (double r : b.request) out(block++ * kSummaryBlockSize + BruteNearestRequest(r)) = 1.0;
  static constexpr int kPhaseEdges[] = {1, 3, 5, 9};
  int phase = 0;
  while (phase < 4 && b.turn > kPhaseEdges[phase]) ++phase;
  out(block * kSummaryBlockSize + phase) = 1.0;
  return out;
}

// Upper 1% point of the chi-square distribution with k degrees of freedom
// (Wilson-Hilferty).
inline double ChiSquareCritical99(int k) {
  const double z = 2.326347874040841;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

// Random valid belief; some masses are drawn from a coarse lattice so that
// grid ties occur.
inline BeliefState RandomBelief(const Ontology& o, Rng& rng) {
  BeliefState b = FreshBelief(o);
  const bool lattice = Bernoulli(rng, 0.3);
  for (size_t s = 0; s < b.value_mass.size(); ++s) {
    std::vector<double> w(b.value_mass[s].size() + 1);
    for (auto& x : w) {
      x = lattice ? UniformInt(rng, 6) * 0.1 : -std::log(1.0 - Uniform01(rng)) * (Bernoulli(rng, 0.5) ? 5.0 : 0.2);
    }
    if (Bernoulli(rng, 0.2)) std::fill(w.begin(), w.end() - 1, 0.0);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) {
      w.back() = 1.0;
      total = 1.0;
    }
    for (size_t v = 0; v + 1 < w.size(); ++v) b.value_mass[s][v] = w[v] / total;
    b.not_mentioned[s] = w.back() / total;
  }
  for (auto& r : b.request) r = lattice ? UniformInt(rng, 11) * 0.1 : Uniform01(rng);
  b.turn = UniformInt(rng, 31);
  return b;
}

}  // namespace dialrl::oracle

#endif  // DIALRL_TESTS_ORACLES_H_
