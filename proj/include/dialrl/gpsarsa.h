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

#ifndef DIALRL_GPSARSA_H_
#define DIALRL_GPSARSA_H_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dialrl/agent.h"
#include "dialrl/numerics.h"
#include "dialrl/rng.h"
#include "json.hpp"

namespace dialrl {

// Squared-exponential belief kernel times a delta kernel on actions.
struct KernelSpec {
  double length_scale = 3.0;
  double variance = 1.0;
  double noise_variance = 0.1;

  void Validate() const;
};

struct GpPoint {
  Features features;
  int action = 0;
};

// sigma_k^2 exp(-|b1 - b2|^2 / (2 l^2)) [a1 == a2]. DomainError on a size mismatch.
double Kernel(const KernelSpec& spec, const GpPoint& p1, const GpPoint& p2);

struct AdmitResult {
  bool admit = false;
  double residual = 0.0;
  // K^-1 k(p); the projection of the point on the dictionary.
  Eigen::VectorXd coefficients;
};

struct GpConfig {
  KernelSpec kernel;
  // Sparsification threshold nu.
  double threshold = 0.1;
  double gamma = 0.99;
  // Added to every Gram diagonal entry.
  double jitter = 1e-10;
  // Dictionary size that triggers a warning in the training log.
  int dictionary_alarm = 2000;

  void Validate() const;
};

nlohmann::json ToJson(const GpConfig& cfg);
GpConfig GpConfigFromJson(const nlohmann::json& j, GpConfig base = {});

// Sparse online GP model of Q over (summary belief, action) pairs.
//
// The dictionary values q = Q(D) carry a Gaussian posterior N(mu, P) that
// starts at the prior N(0, K). Any point x is represented through its
// projection a(x) = K^-1 k(x), so Q(x) = a(x)^T q. Each transition
// contributes the observation r = h^T q + noise with h = a(x) - gamma a(x')
// (h = a(x) at a terminal step) and noise variance sigma_n^2, absorbed by a
// rank-one Kalman update. Admitting a new point extends (mu, P) with its
// conditional prior given the current dictionary, so with every point
// admitted and terminal-only data the posterior mean matches exact GP
// regression.
class SparseGp {
 public:
  explicit SparseGp(GpConfig cfg = {});

  const GpConfig& config() const { return cfg_; }
  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<GpPoint>& dictionary() const { return points_; }
  const Eigen::VectorXd& mean() const { return mu_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& gram_inverse() const { return kinv_; }

  // Kernel vector of p against the dictionary.
  Eigen::VectorXd KernelVector(const GpPoint& p) const;
  AdmitResult AdmitTest(const GpPoint& p) const;
  // Admits p if it passes the test; returns true when the dictionary grew.
  bool MaybeAdmit(const GpPoint& p);

  // One temporal-difference observation. next is ignored when terminal.
  void SarsaUpdate(const GpPoint& current, double reward, const GpPoint& next, bool terminal);

  double QMean(const GpPoint& p) const;
  // Posterior means of every action at these features.
  Eigen::VectorXd QValues(const Features& features, int num_actions) const;
  // Posterior variance of Q at p.
  double QVariance(const GpPoint& p) const;

  nlohmann::json ToJson() const;
  static SparseGp FromJson(const nlohmann::json& j);

 private:
  void Admit(const GpPoint& p, const AdmitResult& test);
  void RefreshWeights();

  GpConfig cfg_;
  std::vector<GpPoint> points_;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd kinv_;
  // K^-1 mu, so that QMean(x) = k(x)^T weights_.
  Eigen::VectorXd weights_;
};

// With probability epsilon uniform, otherwise a sample from softmax(Q).
int SelectActionESoftmax(const Eigen::VectorXd& q, double epsilon, Rng& rng);

// GP-SARSA agent. Learning is on-policy: Learn needs the successor action.
class GpSarsaAgent : public Agent {
 public:
  GpSarsaAgent(int num_actions, GpConfig cfg);

  std::string algorithm() const override { return "gpsarsa"; }
  int num_actions() const override { return num_actions_; }
  int SelectAction(const Features& features, double epsilon, Rng& rng) override;
  int GreedyAction(const Features& features) const override;
  void Learn(const Transition& t, int next_action, Rng& rng) override;

  const SparseGp& gp() const { return gp_; }
  int64_t updates() const { return updates_; }

  nlohmann::json Checkpoint() const override;
  void Restore(const nlohmann::json& j) override;

 private:
  int num_actions_;
  SparseGp gp_;
  int64_t updates_ = 0;
};

}  // namespace dialrl

#endif  // DIALRL_GPSARSA_H_
