#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "regnn/oracle.hpp"
#include "regnn/rng.hpp"
#include "regnn/wireless.hpp"

using namespace regnn;
using graph::ChannelMatrix;

namespace {

double distance(wireless::Point a, wireless::Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST_SUITE("wireless") {
  TEST_CASE("ad-hoc drop region and receiver box") {
    Rng rng(1);
    const wireless::NetworkModel net = wireless::generate_adhoc(50, rng, 1.0, 50);
    CHECK(wireless::adhoc_half_width(50, 1.0, 50) == 50.0);
    CHECK(net.m == 50);
    CHECK(net.n == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(std::abs(net.tx[i].x) <= 50.0);
      CHECK(std::abs(net.tx[i].y) <= 50.0);
      CHECK(std::abs(net.rx[i].x - net.tx[i].x) <= 12.5);
      CHECK(std::abs(net.rx[i].y - net.tx[i].y) <= 12.5);
      CHECK(net.pairing[i] == i);
    }
  }

  TEST_CASE("constant-density region for a larger network") {
    CHECK(wireless::adhoc_half_width(75, 1.0, 50) == doctest::Approx(61.237243569579).epsilon(1e-12));
    CHECK(wireless::adhoc_half_width(100, 2.0, 50) == doctest::Approx(50.0 * std::sqrt(2.0) / 2.0));
    Rng rng(2);
    const wireless::NetworkModel net = wireless::generate_adhoc(75, rng, 1.0, 50);
    const double s = wireless::adhoc_half_width(75, 1.0, 50);
    double reach = 0.0;
    for (const auto& p : net.tx) reach = std::max({reach, std::abs(p.x), std::abs(p.y)});
    CHECK(reach <= s);
    CHECK(reach > 0.9 * s);
  }

  TEST_CASE("path loss follows the distance law") {
    Rng rng(3);
    const wireless::NetworkModel net = wireless::generate_adhoc(6, rng);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        CHECK(net.pathloss(i, j) ==
              doctest::Approx(std::pow(distance(net.tx[i], net.rx[net.pairing[j]]), -2.2)).epsilon(1e-13));
  }

  TEST_CASE("generation is seed-deterministic") {
    Rng a(4), b(4);
    const wireless::NetworkModel x = wireless::generate_adhoc(20, a), y = wireless::generate_adhoc(20, b);
    CHECK(x.tx == y.tx);
    CHECK(x.rx == y.rx);
    CHECK(x.pathloss == y.pathloss);
  }

  TEST_CASE("generation rejects bad arguments") {
    Rng rng(5);
    CHECK_THROWS_AS(wireless::generate_adhoc(1, rng), std::invalid_argument);
    CHECK_THROWS_AS(wireless::generate_adhoc(4, rng, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(wireless::generate_multicell(50, 7, rng), std::invalid_argument);
  }

  TEST_CASE("multicell users are spread evenly over the cells") {
    Rng rng(6);
    const wireless::NetworkModel net = wireless::generate_multicell(50, 5, rng);
    CHECK(net.n == 5);
    std::vector<int> per_cell(5, 0);
    for (std::size_t r : net.pairing) ++per_cell[r];
    CHECK(per_cell == std::vector<int>(5, 10));
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 50; ++j)
        CHECK(net.pathloss(i, j) == doctest::Approx(std::pow(distance(net.tx[i], net.rx[net.pairing[j]]), -2.2)));
  }

  TEST_CASE("single-cell network is pure multiple access") {
    Rng rng(7);
    const wireless::NetworkModel net = wireless::generate_multicell(8, 1, rng);
    for (std::size_t r : net.pairing) CHECK(r == 0);
  }

  TEST_CASE("one user per cell pairs bijectively") {
    Rng rng(8);
    const wireless::NetworkModel net = wireless::generate_multicell(9, 9, rng);
    CHECK(std::set<std::size_t>(net.pairing.begin(), net.pairing.end()).size() == 9);
  }

  TEST_CASE("topology round trip through text") {
    Rng rng(9);
    const wireless::NetworkModel net = wireless::generate_multicell(12, 4, rng, 1.5, 10);
    const wireless::NetworkModel back = wireless::network_from_text(wireless::to_text(net));
    CHECK(back.kind == net.kind);
    CHECK(back.tx == net.tx);
    CHECK(back.rx == net.rx);
    CHECK(back.pairing == net.pairing);
    CHECK(back.pathloss == net.pathloss);
    CHECK_THROWS(wireless::network_from_text("{\"version\": 99}"));
  }

  TEST_CASE("fading respects zero path loss and is seed-deterministic") {
    Rng rng(10);
    wireless::NetworkModel net = wireless::generate_adhoc(4, rng);
    std::vector<double> e(net.pathloss.entries().begin(), net.pathloss.entries().end());
    e[1] = 0.0;
    e[6] = 0.0;
    net.pathloss = ChannelMatrix(4, e);
    Rng a(11), b(11);
    const auto x = wireless::sample_fading(net, a), y = wireless::sample_fading(net, b);
    CHECK(x.H == y.H);
    CHECK(x.H(0, 1) == 0.0);
    CHECK(x.H(1, 2) == 0.0);
    for (double v : x.H.entries()) CHECK(v >= 0.0);
  }

  TEST_CASE("unit-power Rayleigh second moment") {
    Rng rng(12);
    const std::size_t N = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double h = wireless::sample_rayleigh(rng, wireless::kUnitPowerRayleighScale);
      sum += h * h;
      sum2 += h * h * h * h;
    }
    const double mean = sum / N;
    CHECK(mean >= 0.99);
    CHECK(mean <= 1.01);
    // E[h^4] = 2 for unit power, so the standard error of the mean is 1/sqrt(N).
    CHECK(std::abs(mean - 1.0) <= 3.0 * std::sqrt((sum2 / N - mean * mean) / N));
  }

  TEST_CASE("capacity closed forms") {
    const ChannelMatrix one(1, {1.0});
    CHECK(wireless::capacity(std::vector<double>{1.0}, one, 1.0)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    Rng rng(13);
    const ChannelMatrix H = oracle::random_channel(3, rng);
    for (double r : wireless::capacity(std::vector<double>(3, 0.0), H, 1.0)) CHECK(r == 0.0);
    const std::vector<double> p = oracle::random_vector(3, 0.0, 2.0, rng);
    const auto got = wireless::capacity(p, H, 0.7);
    const auto want = oracle::reference_capacity(p, H, 0.7);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-15);
  }

  TEST_CASE("capacity is relabeling-equivariant") {
    Rng rng(14);
    for (int n = 0; n < 100; ++n) {
      const std::size_t m = 2 + n % 12;
      const ChannelMatrix H = oracle::random_channel(m, rng);
      const std::vector<double> p = oracle::random_vector(m, 0.0, 1.0, rng);
      CHECK(oracle::reward_equivariance_residual(p, H, 1.0, oracle::random_permutation(m, rng)) <= 1e-12);
    }
  }

  TEST_CASE("stronger interference never helps") {
    Rng rng(15);
    for (int n = 0; n < 50; ++n) {
      const ChannelMatrix H = oracle::random_channel(5, rng);
      const std::vector<double> p = oracle::random_vector(5, 0.0, 1.0, rng);
      const auto before = wireless::capacity(p, H, 1.0);
      std::vector<double> e(H.entries().begin(), H.entries().end());
      const std::size_t j = n % 5, i = (j + 1 + n % 4) % 5;
      e[j * 5 + i] *= 1.5;  // h_ji, interference from j at receiver i
      const auto after = wireless::capacity(p, ChannelMatrix(5, e), 1.0);
      CHECK(after[i] <= before[i]);
    }
  }

  TEST_CASE("WMMSE gives a lone user full power") {
    const auto w = wireless::wmmse(ChannelMatrix(1, {0.8}), 1.0, 3.0);
    CHECK(w.power[0] == doctest::Approx(3.0));
  }

  TEST_CASE("WMMSE sum-rate never decreases across iterations") {
    Rng rng(16);
    for (int n = 0; n < 20; ++n) {
      const ChannelMatrix H = oracle::random_channel(4, rng);
      double prev = wireless::sum_rate(std::vector<double>(4, 1.0), H, 0.1);
      for (std::size_t k = 1; k <= 30; ++k) {
        const auto w = wireless::wmmse(H, 0.1, 1.0, k, 0.0);
        const double rate = wireless::sum_rate(w.power, H, 0.1);
        CHECK(rate >= prev - 1e-12);
        prev = rate;
      }
    }
  }

  TEST_CASE("WMMSE stays in range and below a fine grid search") {
    Rng rng(17);
    for (int n = 0; n < 10; ++n) {
      const ChannelMatrix H = oracle::random_channel(4, rng);
      const auto w = wireless::wmmse(H, 0.1, 1.0);
      for (double p : w.power) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
      double best = 0.0;
      std::vector<double> p(4);
      for (int code = 0; code < 21 * 21 * 21 * 21; ++code) {
        int c = code;
        for (double& v : p) {
          v = (c % 21) / 20.0;
          c /= 21;
        }
        best = std::max(best, wireless::sum_rate(p, H, 0.1));
      }
      CHECK(wireless::sum_rate(w.power, H, 0.1) <= best + 1e-9);
    }
  }

  TEST_CASE("equal power and random selection") {
    CHECK(wireless::equal_power(4, 2.0) == std::vector<double>(4, 0.5));
    Rng rng(18);
    const auto pick = wireless::random_selection(4, 2.0, 1.0, rng);
    CHECK(std::count(pick.begin(), pick.end(), 1.0) == 2);
    CHECK(std::count(pick.begin(), pick.end(), 0.0) == 2);
    CHECK_THROWS_AS(wireless::random_selection(4, 5.0, 1.0, rng), std::invalid_argument);
  }

  TEST_CASE("random selection is uniform over users") {
    Rng rng(19);
    const std::size_t N = 100000, m = 6;
    std::vector<double> freq(m, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const auto pick = wireless::random_selection(m, 2.5, 1.0, rng);
      for (std::size_t i = 0; i < m; ++i) freq[i] += pick[i];
    }
    const double p = 2.0 / 6.0;
    for (double f : freq) CHECK(std::abs(f / N - p) <= 3.0 * std::sqrt(p * (1 - p) / N));
  }

  TEST_CASE("brute force small cases") {
    const auto lone = wireless::brute_force_binary(ChannelMatrix(1, {0.5}), 1.0, 1.0);
    CHECK(lone.allocation == std::vector<double>{1.0});
    const auto apart = wireless::brute_force_binary(ChannelMatrix(2, {1.0, 0.0, 0.0, 1.0}), 1.0, 1.0);
    CHECK(apart.allocation == std::vector<double>{1.0, 1.0});

    const ChannelMatrix strong(2, {1.0, 10.0, 10.0, 1.0});
    const double both = wireless::sum_rate(std::vector<double>{1.0, 1.0}, strong, 1.0);
    const double one = wireless::sum_rate(std::vector<double>{1.0, 0.0}, strong, 1.0);
    CHECK(one > both);
    const auto best = wireless::brute_force_binary(strong, 1.0, 1.0);
    CHECK(best.sum_rate == doctest::Approx(one));
    CHECK(best.allocation == std::vector<double>{1.0, 0.0});  // tie goes to the lowest code
    CHECK_THROWS(wireless::brute_force_binary(ChannelMatrix(17), 1.0, 1.0));
  }

  TEST_CASE("brute force dominates every binary allocation") {
    Rng rng(20);
    for (int n = 0; n < 20; ++n) {
      const ChannelMatrix H = oracle::random_channel(5, rng);
      const auto best = wireless::brute_force_binary(H, 0.2, 1.0);
      for (double v : best.allocation) CHECK((v == 0.0 || v == 1.0));
      for (int code = 0; code < 32; ++code) {
        std::vector<double> p(5);
        for (int i = 0; i < 5; ++i) p[i] = (code >> i) & 1;
        CHECK(wireless::sum_rate(p, H, 0.2) <= best.sum_rate);
      }
    }
  }

  TEST_CASE("exponential demand mean") {
    Rng rng(21);
    const std::size_t N = 1000000;
    double sum = 0.0;
    bool nonneg = true;
    for (std::size_t n = 0; n < N / 10; ++n)
      for (double d : wireless::sample_demand(10, 0.05, rng)) {
        sum += d;
        nonneg = nonneg && d >= 0.0;
      }
    const double mean = sum / N;
    CHECK(nonneg);
    CHECK(mean >= 0.05 * 0.99);
    CHECK(mean <= 0.05 * 1.01);
    CHECK(std::abs(mean - 0.05) <= 3.0 * 0.05 / std::sqrt(static_cast<double>(N)));
    Rng a(22), b(22);
    CHECK(wireless::sample_demand(5, 0.05, a) == wireless::sample_demand(5, 0.05, b));
  }

  TEST_CASE("problem validation") {
    wireless::ProblemSpec p;
    CHECK_NOTHROW(p.validate());
    p.sigma2 = 0.0;
    CHECK_THROWS(p.validate());
    p.sigma2 = 1.0;
    p.p_max = -1.0;
    CHECK_THROWS(p.validate());
    CHECK_THROWS(wireless::parse_variant("fairness"));
    CHECK(wireless::parse_topology("multicell") == wireless::Topology::multicell);
  }
}
