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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dialrl/errors.h"
#include "dialrl/numerics.h"
#include "oracles.h"

namespace dialrl {
namespace {

Eigen::VectorXd RandomInput(int n, Rng& rng) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = UniformReal(rng, -1.0, 1.0);
  return x;
}

FeedForwardNet TinyNet(OutputHead head, int outputs, uint64_t seed) {
  FeedForwardNet net({4, 6, 5, outputs}, head);
  Rng rng(seed);
  net.InitGlorot(rng);
  // Nonzero biases exercise every term of the backward pass.
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = UniformReal(rng, -0.5, 0.5);
  }
  return net;
}

TEST_CASE("forward shapes, zero maps and normalization") {
  FeedForwardNet lin({5, 7, 3, 4}, OutputHead::kLinear);
  CHECK(lin.NumParams() == (5 + 1) * 7 + (7 + 1) * 3 + (3 + 1) * 4);
  CHECK(lin.Forward(Eigen::VectorXd::Ones(5)).isZero());
  FeedForwardNet soft({5, 7, 3, 11}, OutputHead::kSoftmax);
  const Eigen::VectorXd p = soft.Forward(Eigen::VectorXd::Ones(5));
  for (int i = 0; i < 11; ++i) CHECK(p(i) == doctest::Approx(1.0 / 11).epsilon(1e-12));
  CHECK_THROWS_AS(soft.Forward(Eigen::VectorXd::Ones(4)), ShapeError);

  Rng rng(5);
  soft.InitGlorot(rng);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd q = soft.Forward(RandomInput(5, rng) * 50.0);
    CHECK(std::abs(q.sum() - 1.0) <= 1e-9);
    CHECK(q.minCoeff() >= 0.0);
  }
  CHECK(std::abs(Softmax(Eigen::Vector3d(1e300, -1e300, 0.0)).sum() - 1.0) <= 1e-9);
}

TEST_CASE("glorot initialization bounds") {
  FeedForwardNet net({60, 130, 50, 7}, OutputHead::kLinear);
  Rng rng(1);
  net.InitGlorot(rng);
  const std::vector<int>& sizes = net.layer_sizes();
  for (size_t l = 0; l < net.layers().size(); ++l) {
    const double bound = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    CHECK(net.layers()[l].weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.layers()[l].bias.isZero());
  }
}

TEST_CASE("backward matches central differences for every head") {
  Rng rng(11);
  for (OutputHead head : {OutputHead::kLinear, OutputHead::kSoftmax}) {
    FeedForwardNet net = TinyNet(head, 3, 2);
    const Eigen::VectorXd x = RandomInput(4, rng);
    const Eigen::VectorXd up = RandomInput(3, rng);
    const GradientSet g = net.Backward(x, up);
    const double err = oracle::MaxGradientError(net, g, [&] { return up.dot(net.Forward(x)); });
    CHECK(err <= 1e-4);
  }
  FeedForwardNet scalar = TinyNet(OutputHead::kScalarLinear, 1, 3);
  const Eigen::VectorXd x = RandomInput(4, rng);
  const GradientSet g = scalar.Backward(x, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(oracle::MaxGradientError(scalar, g, [&] { return scalar.Scalar(x); }) <= 1e-4);
  CHECK(scalar.Backward(x, Eigen::VectorXd::Zero(1)).SquaredNorm() == 0.0);
  CHECK_THROWS_AS(scalar.Backward(x, Eigen::VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
  Rng rng(4);
  FeedForwardNet net = TinyNet(OutputHead::kLinear, 3, 8);
  Eigen::MatrixXd xs(4, 5), ups(3, 5);
  for (int c = 0; c < 5; ++c) {
    xs.col(c) = RandomInput(4, rng);
    ups.col(c) = RandomInput(3, rng);
  }
  GradientSet sum = net.ZeroGradient();
  for (int c = 0; c < 5; ++c) sum += net.Backward(xs.col(c), ups.col(c));
  GradientSet batch = net.BackwardBatch(xs, ups);
  GradientSet diff = batch;
  diff *= -1.0;
  diff += sum;
  CHECK(diff.SquaredNorm() <= 1e-20);
  const Eigen::MatrixXd out = net.ForwardBatch(xs);
  for (int c = 0; c < 5; ++c) CHECK((out.col(c) - net.Forward(xs.col(c))).norm() <= 1e-12);
}

TEST_CASE("losses and their gradients") {
  const Eigen::Vector3d x(0.3, -1.0, 2.0);
  CHECK(MseLoss(x, x).loss == 0.0);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(11, 1.0 / 11);
  CHECK(CrossEntropyLoss(uniform, 4).loss == doctest::Approx(std::log(11.0)));
  Eigen::VectorXd point = Eigen::VectorXd::Zero(11);
  point(2) = 1.0;
  CHECK(CrossEntropyLoss(point, 2).loss == doctest::Approx(0.0));
  CHECK(CrossEntropyLoss(point, 3).clamped);

  Rng rng(9);
  FeedForwardNet net = TinyNet(OutputHead::kLinear, 3, 4);
  const Eigen::VectorXd in = RandomInput(4, rng);
  const Eigen::Vector3d target(0.5, -0.2, 0.1);
  const GradientSet gm = net.Backward(in, MseLoss(net.Forward(in), target).gradient);
  CHECK(oracle::MaxGradientError(net, gm, [&] { return MseLoss(net.Forward(in), target).loss; }) <= 1e-4);

  FeedForwardNet soft = TinyNet(OutputHead::kSoftmax, 3, 5);
  const int t = 1;
  const GradientSet gc = soft.Backward(in, CrossEntropyLoss(soft.Forward(in), t).gradient);
  CHECK(oracle::MaxGradientError(soft, gc, [&] { return CrossEntropyLoss(soft.Forward(in), t).loss; }) <= 1e-4);

  // At the logits the cross-entropy gradient is p - onehot(t): with an
  // identity-like last layer the bias gradient exposes it directly.
  const Eigen::VectorXd p = soft.Forward(in);
  Eigen::VectorXd expected = p;
  expected(t) -= 1.0;
  CHECK((gc.layers().back().bias - expected).norm() <= 1e-9);
}

TEST_CASE("l2 penalty") {
  FeedForwardNet net({1, 1}, OutputHead::kLinear);
  net.layers()[0].weights(0, 0) = 2.0;
  net.layers()[0].bias(0) = 5.0;
  const PenaltyResult r = L2Penalty(net, 0.5);
  CHECK(r.penalty == doctest::Approx(2.0));
  CHECK(r.gradient.layers()[0].weights(0, 0) == doctest::Approx(2.0));
  CHECK(r.gradient.layers()[0].bias(0) == 0.0);
  CHECK(L2Penalty(net, 0.0).penalty == 0.0);
  CHECK(L2Penalty(net, 0.0).gradient.SquaredNorm() == 0.0);

  FeedForwardNet tiny = TinyNet(OutputHead::kLinear, 2, 6);
  const GradientSet g = L2Penalty(tiny, 0.3).gradient;
  CHECK(oracle::MaxGradientError(tiny, g, [&] { return L2Penalty(tiny, 0.3).penalty; }) <= 1e-4);
}

TEST_CASE("adadelta recursions") {
  FeedForwardNet net({1, 1}, OutputHead::kLinear);
  AdadeltaState opt(net, 0.95, 1e-6);
  GradientSet g = net.ZeroGradient();
  g.layers()[0].weights(0, 0) = 1.0;
  const GradientSet first = opt.Step(net, g);
  const double expected = std::sqrt(1e-6 / (0.05 + 1e-6));
  CHECK(first.layers()[0].weights(0, 0) == doctest::Approx(-expected).epsilon(1e-12));
  CHECK(net.layers()[0].weights(0, 0) == doctest::Approx(-expected).epsilon(1e-12));

  // Zero gradient: zero update, accumulators decay by rho.
  const double sq = opt.sq_grad().layers()[0].weights(0, 0);
  const double su = opt.sq_update().layers()[0].weights(0, 0);
  const GradientSet zero = opt.Step(net, net.ZeroGradient());
  CHECK(zero.SquaredNorm() == 0.0);
  CHECK(opt.sq_grad().layers()[0].weights(0, 0) == doctest::Approx(0.95 * sq));
  CHECK(opt.sq_update().layers()[0].weights(0, 0) == doctest::Approx(0.95 * su));

  // Constant gradient: the update keeps the opposite sign and its magnitude
  // changes less and less from step to step.
  FeedForwardNet n2({1, 1}, OutputHead::kLinear);
  AdadeltaState o2(n2, 0.95, 1e-6);
  GradientSet c = n2.ZeroGradient();
  c.layers()[0].weights(0, 0) = 0.3;
  double prev = 0.0, prev_change = 1.0, change = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double d = o2.Step(n2, c).layers()[0].weights(0, 0);
    CHECK(d < 0.0);
    change = std::abs(std::abs(d) - prev);
    if (i > 100) prev_change = std::max(prev_change, change);
    prev = std::abs(d);
  }
  CHECK(change <= prev_change);
  CHECK(change / prev <= 1e-2);
}

TEST_CASE("adadelta is scale free at tiny epsilon") {
  FeedForwardNet a({2, 2}, OutputHead::kLinear), b({2, 2}, OutputHead::kLinear);
  AdadeltaState oa(a, 0.95, 1e-12), ob(b, 0.95, 1e-12);
  GradientSet g = a.ZeroGradient();
  g.layers()[0].weights << 0.2, -0.7, 1.5, 0.01;
  g.layers()[0].bias << -0.3, 0.9;
  GradientSet big = g;
  big *= 1000.0;
  const GradientSet ua = oa.Step(a, g);
  const GradientSet ub = ob.Step(b, big);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(oracle::RelativeError(ua.layers()[0].weights.data()[i], ub.layers()[0].weights.data()[i]) <= 1e-6);
  }
}

TEST_CASE("adadelta rejects non-finite gradients without side effects") {
  FeedForwardNet net({2, 3, 1}, OutputHead::kScalarLinear);
  Rng rng(1);
  net.InitGlorot(rng);
  const FeedForwardNet before = net;
  AdadeltaState opt(net);
  GradientSet g = net.ZeroGradient();
  g.layers()[1].weights(0, 2) = std::nan("");
  try {
    opt.Step(net, g);
    FAIL("expected NumericsError");
  } catch (const NumericsError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  CHECK(net.layers()[1].weights == before.layers()[1].weights);
  CHECK(opt.sq_grad().SquaredNorm() == 0.0);
}

TEST_CASE("copy_params") {
  Rng rng(2);
  FeedForwardNet src({3, 4, 2}, OutputHead::kLinear), dst({3, 4, 2}, OutputHead::kLinear);
  src.InitGlorot(rng);
  CopyParams(src, dst);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = RandomInput(3, rng);
    CHECK(src.Forward(x) == dst.Forward(x));
  }
  const FeedForwardNet snapshot = dst;
  src.layers()[0].weights(0, 0) += 1.0;
  CHECK(dst.layers()[0].weights == snapshot.layers()[0].weights);
  CopyParams(src, dst);
  CopyParams(src, dst);
  CHECK(dst.layers()[0].weights == src.layers()[0].weights);
  FeedForwardNet other({3, 5, 2}, OutputHead::kLinear);
  CHECK_THROWS_AS(CopyParams(src, other), ShapeError);
}

TEST_CASE("net and optimizer serialization is bit exact") {
  Rng rng(8);
  FeedForwardNet net = TinyNet(OutputHead::kSoftmax, 3, 12);
  std::stringstream ss;
  SaveNet(net, ss);
  const FeedForwardNet back = LoadNet(ss);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = RandomInput(4, rng);
    CHECK(back.Forward(x) == net.Forward(x));
  }
  AdadeltaState opt(net);
  opt.Step(net, net.Backward(RandomInput(4, rng), RandomInput(3, rng)));
  const AdadeltaState opt2 = AdadeltaState::FromJson(opt.ToJson());
  CHECK(opt2.sq_grad().Dot(opt2.sq_grad()) == opt.sq_grad().Dot(opt.sq_grad()));
}

TEST_CASE("training trajectories are deterministic") {
  auto run = [] {
    Rng rng(77);
    FeedForwardNet net({3, 8, 2}, OutputHead::kLinear);
    net.InitGlorot(rng);
    AdadeltaState opt(net);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd x = RandomInput(3, rng);
      opt.Step(net, net.Backward(x, MseLoss(net.Forward(x), Eigen::Vector2d(1.0, -1.0)).gradient));
    }
    return net.Forward(Eigen::Vector3d(0.1, 0.2, 0.3));
  };
  CHECK(run() == run());
}

}  // namespace
}  // namespace dialrl
