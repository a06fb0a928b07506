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

#include "dialrl/gpsarsa.h"

#include <cmath>

#include "dialrl/errors.h"

namespace dialrl {

using nlohmann::json;

namespace {

json MatrixToJson(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd MatrixFromJson(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (data.size() != static_cast<size_t>(rows * cols)) throw ParseError("matrix entry count mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

Eigen::VectorXd Padded(const Eigen::VectorXd& v, Eigen::Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  out.head(v.size()) = v;
  return out;
}

}  // namespace

void KernelSpec::Validate() const {
  if (!(length_scale > 0.0)) throw ConfigError("gp.kernel.length_scale must be positive");
  if (!(variance > 0.0)) throw ConfigError("gp.kernel.variance must be positive");
  if (!(noise_variance > 0.0)) throw ConfigError("gp.kernel.noise_variance must be positive");
}

double Kernel(const KernelSpec& spec, const GpPoint& p1, const GpPoint& p2) {
  if (p1.features.size() != p2.features.size()) throw DomainError("kernel arguments differ in feature size");
  if (p1.action != p2.action) return 0.0;
  const double d2 = (p1.features - p2.features).squaredNorm();
  return spec.variance * std::exp(-d2 / (2.0 * spec.length_scale * spec.length_scale));
}

void GpConfig::Validate() const {
  kernel.Validate();
  if (!(threshold >= 0.0)) throw ConfigError("gp.threshold must be nonnegative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gp.gamma outside [0,1]");
  if (!(jitter >= 0.0)) throw ConfigError("gp.jitter must be nonnegative");
}

json ToJson(const GpConfig& cfg) {
  return {{"length_scale", cfg.kernel.length_scale},
          {"variance", cfg.kernel.variance},
          {"noise_variance", cfg.kernel.noise_variance},
          {"threshold", cfg.threshold},
          {"gamma", cfg.gamma},
          {"jitter", cfg.jitter},
          {"dictionary_alarm", cfg.dictionary_alarm}};
}

GpConfig GpConfigFromJson(const json& j, GpConfig c) {
  c.kernel.length_scale = j.value("length_scale", c.kernel.length_scale);
  c.kernel.variance = j.value("variance", c.kernel.variance);
  c.kernel.noise_variance = j.value("noise_variance", c.kernel.noise_variance);
  c.threshold = j.value("threshold", c.threshold);
  c.gamma = j.value("gamma", c.gamma);
  c.jitter = j.value("jitter", c.jitter);
  c.dictionary_alarm = j.value("dictionary_alarm", c.dictionary_alarm);
  return c;
}

// ---------------------------------------------------------------------------
// SparseGp

SparseGp::SparseGp(GpConfig cfg) : cfg_(std::move(cfg)) { cfg_.Validate(); }

Eigen::VectorXd SparseGp::KernelVector(const GpPoint& p) const {
  Eigen::VectorXd k(size());
  for (int i = 0; i < size(); ++i) k(i) = Kernel(cfg_.kernel, points_[i], p);
  return k;
}

AdmitResult SparseGp::AdmitTest(const GpPoint& p) const {
  AdmitResult out;
  const double kpp = Kernel(cfg_.kernel, p, p);
  if (points_.empty()) {
    out.admit = true;
    out.residual = kpp;
    return out;
  }
  const Eigen::VectorXd k = KernelVector(p);
  out.coefficients = kinv_ * k;
  out.residual = kpp - k.dot(out.coefficients);
  out.admit = out.residual > cfg_.threshold;
  return out;
}

void SparseGp::Admit(const GpPoint& p, const AdmitResult& test) {
  const Eigen::Index m = size();
  const double kpp = Kernel(cfg_.kernel, p, p);
  if (m == 0) {
    kinv_ = Eigen::MatrixXd::Constant(1, 1, 1.0 / (kpp + cfg_.jitter));
    mu_ = Eigen::VectorXd::Zero(1);
    cov_ = Eigen::MatrixXd::Constant(1, 1, kpp);
  } else {
    const Eigen::VectorXd& a = test.coefficients;
    const double d = test.residual + cfg_.jitter;
    if (!(d > 0.0)) throw NumericsError("non-positive Gram residual on admission");
    Eigen::MatrixXd kinv(m + 1, m + 1);
    kinv.topLeftCorner(m, m) = kinv_ + a * a.transpose() / d;
    kinv.topRightCorner(m, 1) = -a / d;
    kinv.bottomLeftCorner(1, m) = -a.transpose() / d;
    kinv(m, m) = 1.0 / d;
    kinv_ = std::move(kinv);

    const Eigen::VectorXd pa = cov_ * a;
    Eigen::MatrixXd cov(m + 1, m + 1);
    cov.topLeftCorner(m, m) = cov_;
    cov.topRightCorner(m, 1) = pa;
    cov.bottomLeftCorner(1, m) = pa.transpose();
    cov(m, m) = a.dot(pa) + test.residual;
    cov_ = std::move(cov);

    mu_.conservativeResize(m + 1);
    mu_(m) = a.dot(mu_.head(m));
  }
  points_.push_back(p);
}

bool SparseGp::MaybeAdmit(const GpPoint& p) {
  const AdmitResult test = AdmitTest(p);
  if (!test.admit) return false;
  Admit(p, test);
  RefreshWeights();
  return true;
}

void SparseGp::RefreshWeights() { weights_ = kinv_ * mu_; }

void SparseGp::SarsaUpdate(const GpPoint& current, double reward, const GpPoint& next, bool terminal) {
  // Projection of a point after the dictionary has possibly grown by it.
  auto project = [this](const GpPoint& p) {
    const AdmitResult test = AdmitTest(p);
    if (!test.admit) return test.coefficients;
    Admit(p, test);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
    e(size() - 1) = 1.0;
    return e;
  };
  Eigen::VectorXd h = project(current);
  if (!terminal) {
    const Eigen::VectorXd a_next = project(next);
    h = Padded(h, size()) - cfg_.gamma * a_next;
  }
  const Eigen::VectorXd ph = cov_ * h;
  const double s = h.dot(ph) + cfg_.kernel.noise_variance;
  const double innovation = reward - h.dot(mu_);
  if (!std::isfinite(innovation) || !(s > 0.0)) throw NumericsError("GP update produced a non-finite innovation");
  mu_ += ph * (innovation / s);
  cov_.noalias() -= ph * ph.transpose() / s;
  RefreshWeights();
}

double SparseGp::QMean(const GpPoint& p) const {
  if (points_.empty()) return 0.0;
  return KernelVector(p).dot(weights_);
}

Eigen::VectorXd SparseGp::QValues(const Features& features, int num_actions) const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(num_actions);
  const double scale = 2.0 * cfg_.kernel.length_scale * cfg_.kernel.length_scale;
  for (int i = 0; i < size(); ++i) {
    const GpPoint& d = points_[i];
    if (d.features.size() != features.size()) throw DomainError("query features differ in size from the dictionary");
    if (d.action < 0 || d.action >= num_actions) continue;
    q(d.action) += cfg_.kernel.variance * std::exp(-(d.features - features).squaredNorm() / scale) * weights_(i);
  }
  return q;
}

double SparseGp::QVariance(const GpPoint& p) const {
  const double kpp = Kernel(cfg_.kernel, p, p);
  if (points_.empty()) return kpp;
  const Eigen::VectorXd k = KernelVector(p);
  const Eigen::VectorXd a = kinv_ * k;
  return kpp - k.dot(a) + a.dot(cov_ * a);
}

json SparseGp::ToJson() const {
  json pts = json::array();
  for (const auto& p : points_) {
    pts.push_back({{"action", p.action}, {"features", std::vector<double>(p.features.data(), p.features.data() + p.features.size())}});
  }
  return {{"schema", "dialrl.gp"},
          {"version", 1},
          {"config", dialrl::ToJson(cfg_)},
          {"points", std::move(pts)},
          {"mean", std::vector<double>(mu_.data(), mu_.data() + mu_.size())},
          {"covariance", MatrixToJson(cov_)},
          {"gram_inverse", MatrixToJson(kinv_)}};
}

SparseGp SparseGp::FromJson(const json& j) {
  if (j.value("schema", "") != "dialrl.gp") throw ParseError("not a dialrl.gp checkpoint");
  SparseGp gp(GpConfigFromJson(j.at("config")));
  for (const auto& p : j.at("points")) {
    const auto f = p.at("features").get<std::vector<double>>();
    gp.points_.push_back({Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())),
                          p.at("action").get<int>()});
  }
  const auto mu = j.at("mean").get<std::vector<double>>();
  gp.mu_ = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  gp.cov_ = MatrixFromJson(j.at("covariance"));
  gp.kinv_ = MatrixFromJson(j.at("gram_inverse"));
  const Eigen::Index m = gp.size();
  if (gp.mu_.size() != m || gp.cov_.rows() != m || gp.cov_.cols() != m || gp.kinv_.rows() != m ||
      gp.kinv_.cols() != m) {
    throw ParseError("GP checkpoint matrices do not match the dictionary size");
  }
  if (m > 0) gp.RefreshWeights();
  return gp;
}

// ---------------------------------------------------------------------------
// Agent

int SelectActionESoftmax(const Eigen::VectorXd& q, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && Bernoulli(rng, epsilon)) return UniformInt(rng, static_cast<int>(q.size()));
  const Eigen::VectorXd p = Softmax(q);
  return SampleCategorical(rng, std::vector<double>(p.data(), p.data() + p.size()));
}

GpSarsaAgent::GpSarsaAgent(int num_actions, GpConfig cfg) : num_actions_(num_actions), gp_(std::move(cfg)) {
  if (num_actions <= 0) throw ConfigError("GP-SARSA needs at least one action");
}

int GpSarsaAgent::SelectAction(const Features& features, double epsilon, Rng& rng) {
  return SelectActionESoftmax(gp_.QValues(features, num_actions_), epsilon, rng);
}

int GpSarsaAgent::GreedyAction(const Features& features) const {
  return Argmax(gp_.QValues(features, num_actions_));
}

void GpSarsaAgent::Learn(const Transition& t, int next_action, Rng& /*rng*/) {
  if (!t.terminal && (next_action < 0 || next_action >= num_actions_)) {
    throw UsageError("GP-SARSA needs the successor action of a non-terminal transition");
  }
  gp_.SarsaUpdate({t.features, t.action}, t.reward, {t.next_features, t.terminal ? 0 : next_action}, t.terminal);
  ++updates_;
}

json GpSarsaAgent::Checkpoint() const {
  return {{"schema", "dialrl.gpsarsa"},
          {"version", 1},
          {"algorithm", algorithm()},
          {"num_actions", num_actions_},
          {"gp", gp_.ToJson()},
          {"updates", updates_},
          {"layout", layout_}};
}

void GpSarsaAgent::Restore(const json& j) {
  if (j.value("schema", "") != "dialrl.gpsarsa") throw ParseError("not a dialrl.gpsarsa checkpoint");
  if (j.at("num_actions").get<int>() != num_actions_) throw ShapeError("checkpoint action count differs");
  const auto layout = j.value("layout", std::vector<std::string>{});
  if (!layout_.empty()) CheckLayout(layout_, layout, "checkpoint");
  gp_ = SparseGp::FromJson(j.at("gp"));
  updates_ = j.at("updates").get<int64_t>();
  layout_ = layout;
}

}  // namespace dialrl
