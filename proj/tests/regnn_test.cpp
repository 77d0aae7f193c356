#include <doctest.h>

#include <cmath>

#include "regnn/network.hpp"
#include "regnn/numeric.hpp"
#include "regnn/oracle.hpp"
#include "regnn/rng.hpp"

using namespace regnn;
using graph::ChannelMatrix;
using graph::GraphSignal;

namespace {

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

double output_dot(const gnn::FilterTensor& A, const ChannelMatrix& H, const std::vector<double>& x,
                  const std::vector<double>& g) {
  const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(x));
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * t.probs()[i];
  return s;
}

}  // namespace

TEST_SUITE("regnn") {
  TEST_CASE("parameter counts") {
    CHECK(gnn::num_params(gnn::RegnnConfig::uniform(8, 1, 5)) == 40);
    CHECK(gnn::num_params(gnn::RegnnConfig::uniform(1, 1, 1)) == 1);
    gnn::RegnnConfig c;
    c.features = {1, 3, 1};
    c.taps = {4, 4};
    CHECK(gnn::num_params(c) == 24);
    CHECK(gnn::FilterTensor(c).size() == 24);
  }

  TEST_CASE("config validation") {
    gnn::RegnnConfig c;
    CHECK_THROWS(c.validate());
    c.features = {2, 1};
    c.taps = {3};
    CHECK_THROWS(c.validate());
    c.features = {1, 0, 1};
    c.taps = {3, 3};
    CHECK_THROWS(c.validate());
    c.features = {1, 2, 1};
    c.taps = {3, 0};
    CHECK_THROWS(c.validate());
    CHECK_THROWS(gnn::parse_nonlinearity("tanh"));
  }

  TEST_CASE("zero input with relu hidden layers gives one half everywhere") {
    Rng rng(1);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(gnn::RegnnConfig::uniform(4, 3, 3), 1.0, rng);
    const ChannelMatrix H = oracle::random_channel(6, rng);
    const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(std::vector<double>(6, 0.0)));
    for (std::size_t l = 0; l + 1 < t.layers.size(); ++l)
      for (double v : t.layers[l].output.values()) CHECK(v == 0.0);
    for (double q : t.probs()) CHECK(q == 0.5);
  }

  TEST_CASE("single tap network is a pointwise sigmoid") {
    const double alpha = 0.8;
    const gnn::FilterTensor A(gnn::RegnnConfig::uniform(1, 1, 1), {alpha});
    Rng rng(2);
    const ChannelMatrix H = oracle::random_channel(5, rng);
    const std::vector<double> x = oracle::random_vector(5, -2.0, 2.0, rng);
    const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(x));
    for (std::size_t i = 0; i < 5; ++i) CHECK(t.probs()[i] == doctest::Approx(sigmoid(alpha * x[i])).epsilon(1e-15));
  }

  TEST_CASE("forward matches the explicit-power reimplementation") {
    Rng rng(3);
    for (auto hidden : {gnn::Nonlinearity::relu, gnn::Nonlinearity::abs, gnn::Nonlinearity::sigmoid}) {
      const gnn::FilterTensor A =
          gnn::FilterTensor::random_uniform(gnn::RegnnConfig::uniform(2, 1, 2, hidden), 1.0, rng);
      const ChannelMatrix H = oracle::random_channel(4, rng);
      const std::vector<double> x = oracle::random_vector(4, -1.0, 1.0, rng);
      const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(x));
      const std::vector<double> want = oracle::reference_forward(A, H, x);
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(t.probs()[i] - want[i]) <= 1e-14);
    }
  }

  TEST_CASE("forward is bit-reproducible and the tape replays the output") {
    Rng rng(4);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(gnn::RegnnConfig::uniform(3, 2, 4), 0.5, rng);
    const ChannelMatrix H = oracle::random_channel(7, rng);
    const GraphSignal x(oracle::random_vector(7, -1.0, 1.0, rng));
    const gnn::ForwardTape a = gnn::forward(A, H, x);
    const gnn::ForwardTape b = gnn::forward(A, H, x);
    CHECK(std::vector<double>(a.probs().begin(), a.probs().end()) ==
          std::vector<double>(b.probs().begin(), b.probs().end()));

    // Rebuild each layer from the cached powers and compare bit for bit.
    const gnn::RegnnConfig& c = A.config();
    for (std::size_t l = 0; l < c.layers(); ++l) {
      const gnn::LayerTape& lt = a.layers[l];
      CHECK(lt.input == (l == 0 ? x : a.layers[l - 1].output));
      for (std::size_t g = 0; g < c.features[l + 1]; ++g) {
        for (std::size_t i = 0; i < 7; ++i) {
          const double y = lt.preactivation(i, g);
          const auto n = l + 1 == c.layers() ? gnn::Nonlinearity::sigmoid : c.hidden;
          CHECK(lt.output(i, g) == gnn::activate(n, y));
        }
      }
      CHECK(lt.powers.size() == c.features[l]);
      for (const auto& per_f : lt.powers) CHECK(per_f.size() == c.taps[l]);
    }
  }

  TEST_CASE("parameter count does not depend on the network size") {
    const gnn::RegnnConfig c = gnn::RegnnConfig::uniform(3, 2, 3);
    Rng rng(5);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(c, 0.1, rng);
    for (std::size_t m : {10u, 100u}) {
      const gnn::ForwardTape t = gnn::forward(A, oracle::random_channel(m, rng), GraphSignal(std::vector<double>(m, 1.0)));
      CHECK(t.probs().size() == m);
      CHECK(A.size() == gnn::num_params(c));
    }
  }

  TEST_CASE("overflow names the layer") {
    const gnn::FilterTensor A(gnn::RegnnConfig::uniform(2, 1, 3), {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    const ChannelMatrix H(3, std::vector<double>(9, 1e200));
    try {
      gnn::forward(A, H, GraphSignal(std::vector<double>(3, 1.0)));
      FAIL("expected overflow");
    } catch (const gnn::NumericError& e) {
      CHECK(e.layer() == 1);
    }
  }

  TEST_CASE("relu subgradient at the kink is zero") {
    CHECK(gnn::activate_derivative(gnn::Nonlinearity::relu, 0.0) == 0.0);
    CHECK(gnn::activate_derivative(gnn::Nonlinearity::relu, 1.0) == 1.0);
    CHECK(gnn::activate_derivative(gnn::Nonlinearity::abs, -2.0) == -1.0);
  }

  TEST_CASE("zero output gradient gives a zero tap gradient") {
    Rng rng(6);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(gnn::RegnnConfig::uniform(3, 2, 3), 0.5, rng);
    const ChannelMatrix H = oracle::random_channel(5, rng);
    const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(oracle::random_vector(5, -1.0, 1.0, rng)));
    for (double v : gnn::backward(t, A, H, std::vector<double>(5, 0.0))) CHECK(v == 0.0);
  }

  TEST_CASE("one-layer gradient in closed form") {
    const double alpha = -0.6;
    const gnn::FilterTensor A(gnn::RegnnConfig::uniform(1, 1, 1), {alpha});
    Rng rng(7);
    const ChannelMatrix H = oracle::random_channel(4, rng);
    const std::vector<double> x = oracle::random_vector(4, -1.0, 1.0, rng);
    const std::vector<double> g = oracle::random_vector(4, -1.0, 1.0, rng);
    const auto grad = gnn::backward(gnn::forward(A, H, GraphSignal(x)), A, H, g);
    double want = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double s = sigmoid(alpha * x[i]);
      want += g[i] * s * (1.0 - s) * x[i];
    }
    REQUIRE(grad.size() == 1);
    CHECK(grad[0] == doctest::Approx(want).epsilon(1e-14));
  }

  TEST_CASE("tap gradients match central differences") {
    Rng rng(8);
    std::size_t instances = 0;
    auto check_instance = [&](const gnn::RegnnConfig& c, std::size_t m) {
      const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(c, 0.5, rng);
      const ChannelMatrix H = oracle::random_channel(m, rng);
      const std::vector<double> x = oracle::random_vector(m, -1.0, 1.0, rng);
      const std::vector<double> g = oracle::random_vector(m, -1.0, 1.0, rng);
      const auto analytic = gnn::backward(gnn::forward(A, H, GraphSignal(x)), A, H, g);
      const auto numeric = oracle::central_difference(
          [&](std::span<const double> flat) {
            return output_dot(gnn::FilterTensor(c, std::vector<double>(flat.begin(), flat.end())), H, x, g);
          },
          A.flat(), tol::finite_difference_step);
      for (std::size_t k = 0; k < numeric.size(); ++k)
        CHECK(relative_error(analytic[k], numeric[k], 1e-4) <= tol::gradient_rel);
      ++instances;
    };
    check_instance(gnn::RegnnConfig::uniform(3, 1, 3), 4);
    for (int n = 0; n < 24; ++n) check_instance(oracle::random_config(rng, 4, 5, 3), 2 + n % 5);
    CHECK(instances >= 20);
  }

  TEST_CASE("permutation equivariance") {
    Rng rng(9);
    for (int n = 0; n < 60; ++n) {
      const std::size_t m = 3 + static_cast<std::size_t>(uniform01(rng) * 30.0);
      const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(oracle::random_config(rng, 4, 5, 3), 0.5, rng);
      const ChannelMatrix H = oracle::random_channel(m, rng);
      const std::vector<double> x = oracle::random_vector(m, -1.0, 1.0, rng);
      CHECK(oracle::equivariance_residual(A, H, x, oracle::random_permutation(m, rng)) <= tol::equivariance_abs);
    }
  }

  TEST_CASE("backward rejects a mismatched tape") {
    Rng rng(10);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(gnn::RegnnConfig::uniform(2, 1, 2), 0.5, rng);
    const ChannelMatrix H = oracle::random_channel(4, rng);
    const gnn::ForwardTape t = gnn::forward(A, H, GraphSignal(std::vector<double>(4, 1.0)));
    const gnn::FilterTensor other(gnn::RegnnConfig::uniform(3, 1, 2));
    CHECK_THROWS_AS(gnn::backward(t, other, H, std::vector<double>(4, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(gnn::backward(t, A, H, std::vector<double>(3, 1.0)), std::invalid_argument);
  }

  TEST_CASE("checkpoint round trip is value-exact") {
    Rng rng(11);
    gnn::RegnnConfig c = gnn::RegnnConfig::uniform(3, 2, 4, gnn::Nonlinearity::abs);
    gnn::FilterTensor A = gnn::FilterTensor::random_uniform(c, 1.0, rng);
    A.flat()[0] = 1.0 / 3.0;
    A.flat()[1] = -5e-300;
    const gnn::FilterTensor B = gnn::from_checkpoint(gnn::to_checkpoint(A));
    CHECK(B == A);
    CHECK(B.config().hidden == gnn::Nonlinearity::abs);
  }

  TEST_CASE("corrupt checkpoints are rejected") {
    CHECK_THROWS(gnn::from_checkpoint("not json"));
    CHECK_THROWS(gnn::from_checkpoint("{}"));
    const gnn::FilterTensor A(gnn::RegnnConfig::uniform(1, 1, 2), {0.1, 0.2});
    std::string text = gnn::to_checkpoint(A);
    const auto pos = text.find("0.2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 3, "\"x\"");
    CHECK_THROWS(gnn::from_checkpoint(text));
  }
}
