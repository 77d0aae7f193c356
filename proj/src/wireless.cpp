#include "regnn/wireless.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "regnn/text.hpp"

namespace regnn::wireless {

using graph::ChannelMatrix;
using json = nlohmann::json;

namespace {

constexpr int kNetworkFormatVersion = 1;

Point uniform_in_box(Rng& rng, double cx, double cy, double half_w, double half_h) {
  const double x = cx + half_w * (2.0 * uniform01(rng) - 1.0);
  const double y = cy + half_h * (2.0 * uniform01(rng) - 1.0);
  return {x, y};
}

}  // namespace

std::string_view to_string(Topology t) { return t == Topology::adhoc ? "adhoc" : "multicell"; }

Topology parse_topology(std::string_view name) {
  if (name == "adhoc") return Topology::adhoc;
  if (name == "multicell") return Topology::multicell;
  throw std::invalid_argument("unknown topology '" + std::string(name) + "' (expected adhoc or multicell)");
}

std::string_view to_string(Variant v) {
  return v == Variant::sum_rate_budget ? "sum_rate_budget" : "demand_constrained";
}

Variant parse_variant(std::string_view name) {
  if (name == "sum_rate_budget") return Variant::sum_rate_budget;
  if (name == "demand_constrained") return Variant::demand_constrained;
  throw std::invalid_argument("unknown problem variant '" + std::string(name) +
                              "' (expected sum_rate_budget or demand_constrained)");
}

void ProblemSpec::validate() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("problem: sigma2 must be positive");
  if (!(p_max > 0.0)) throw std::invalid_argument("problem: p_max must be positive");
  spec.validate();
  if (variant == Variant::demand_constrained && !(demand_mean > 0.0))
    throw std::invalid_argument("problem: demand_mean must be positive");
  if (!(rayleigh_scale > 0.0)) throw std::invalid_argument("problem: rayleigh_scale must be positive");
}

void NetworkModel::compute_pathloss() {
  std::vector<double> entries(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const Point& t = tx[i];
      const Point& r = rx[pairing[j]];
      const double d = std::hypot(t.x - r.x, t.y - r.y);
      entries[i * m + j] = std::pow(d, -kPathLossExponent);
    }
  pathloss = ChannelMatrix(m, std::move(entries));
}

void NetworkModel::validate() const {
  if (m == 0 || n == 0) throw std::invalid_argument("network: m and n must be positive");
  if (tx.size() != m || pairing.size() != m || rx.size() != n)
    throw std::invalid_argument("network: position/pairing counts do not match m and n");
  std::vector<bool> served(n, false);
  for (std::size_t r : pairing) {
    if (r >= n) throw std::invalid_argument("network: pairing refers to a missing receiver");
    served[r] = true;
  }
  if (std::find(served.begin(), served.end(), false) != served.end())
    throw std::invalid_argument("network: every receiver must serve at least one transmitter");
  if (kind == Topology::adhoc && n != m) throw std::invalid_argument("network: ad-hoc networks need n == m");
}

double adhoc_half_width(std::size_t m, double density, std::size_t size_ref) {
  const double base = static_cast<double>(size_ref == 0 ? m : size_ref);
  return base * std::sqrt(static_cast<double>(m) / base) / density;
}

NetworkModel generate_adhoc(std::size_t m, Rng& rng, double density, std::size_t size_ref) {
  if (m < 2) throw std::invalid_argument("generate_adhoc: need at least 2 transmitter/receiver pairs");
  if (!(density > 0.0)) throw std::invalid_argument("generate_adhoc: density factor must be positive");
  const double base = static_cast<double>(size_ref == 0 ? m : size_ref);
  const double s = adhoc_half_width(m, density, size_ref);
  const double offset = base / 4.0;

  NetworkModel net;
  net.kind = Topology::adhoc;
  net.m = net.n = m;
  net.tx.reserve(m);
  net.rx.reserve(m);
  for (std::size_t i = 0; i < m; ++i) net.tx.push_back(uniform_in_box(rng, 0.0, 0.0, s, s));
  for (std::size_t i = 0; i < m; ++i) net.rx.push_back(uniform_in_box(rng, net.tx[i].x, net.tx[i].y, offset, offset));
  net.pairing.resize(m);
  std::iota(net.pairing.begin(), net.pairing.end(), std::size_t{0});
  net.compute_pathloss();
  return net;
}

NetworkModel generate_multicell(std::size_t m, std::size_t n, Rng& rng, double density, std::size_t size_ref) {
  if (n == 0 || m == 0 || m % n != 0)
    throw std::invalid_argument("generate_multicell: cell count " + std::to_string(n) +
                                " must divide user count " + std::to_string(m));
  if (!(density > 0.0)) throw std::invalid_argument("generate_multicell: density factor must be positive");
  const double s = adhoc_half_width(m, density, size_ref);
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + cols - 1) / cols;
  const double half_w = s / static_cast<double>(cols);
  const double half_h = s / static_cast<double>(rows);
  const std::size_t per_cell = m / n;

  NetworkModel net;
  net.kind = Topology::multicell;
  net.m = m;
  net.n = n;
  for (std::size_t c = 0; c < n; ++c) {
    const double cx = -s + half_w * (2.0 * static_cast<double>(c % cols) + 1.0);
    const double cy = -s + half_h * (2.0 * static_cast<double>(c / cols) + 1.0);
    net.rx.push_back({cx, cy});
  }
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t u = 0; u < per_cell; ++u) {
      net.tx.push_back(uniform_in_box(rng, net.rx[c].x, net.rx[c].y, half_w, half_h));
      net.pairing.push_back(c);
    }
  net.compute_pathloss();
  return net;
}

double sample_rayleigh(Rng& rng, double scale) { return scale * std::sqrt(-2.0 * std::log1p(-uniform01(rng))); }

double sample_exponential(Rng& rng, double mean) { return -mean * std::log1p(-uniform01(rng)); }

FadingSample sample_fading(const NetworkModel& model, Rng& rng, double rayleigh_scale, std::size_t draw_id) {
  const std::size_t m = model.m;
  std::vector<double> entries(m * m);
  const auto pl = model.pathloss.entries();
  for (std::size_t e = 0; e < m * m; ++e) entries[e] = pl[e] * sample_rayleigh(rng, rayleigh_scale);
  return {ChannelMatrix(m, std::move(entries)), draw_id};
}

std::vector<double> capacity(std::span<const double> p, const ChannelMatrix& H, double sigma2) {
  const std::size_t m = H.dim();
  if (p.size() != m) throw std::invalid_argument("capacity: allocation length does not match channel matrix");
  std::vector<double> rates(m);
  for (std::size_t i = 0; i < m; ++i) {
    double interference = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) interference += H(j, i) * H(j, i) * p[j];
    const double signal = H(i, i) * H(i, i) * p[i];
    rates[i] = std::log1p(signal / (sigma2 + interference));
  }
  return rates;
}

double sum_rate(std::span<const double> p, const ChannelMatrix& H, double sigma2) {
  const auto r = capacity(p, H, sigma2);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

WmmseResult wmmse(const ChannelMatrix& H, double sigma2, double p0, std::size_t max_iters, double tol) {
  if (!(p0 > 0.0)) throw std::invalid_argument("wmmse: p0 must be positive");
  const std::size_t m = H.dim();
  const double v_max = std::sqrt(p0);
  std::vector<double> v(m, v_max), u(m), w(m), v_next(m);

  WmmseResult result;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      double denom = sigma2;
      for (std::size_t j = 0; j < m; ++j) denom += H(j, i) * H(j, i) * v[j] * v[j];
      u[i] = H(i, i) * v[i] / denom;
      w[i] = 1.0 / (1.0 - u[i] * H(i, i) * v[i]);
    }
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < m; ++j) denom += w[j] * u[j] * u[j] * H(i, j) * H(i, j);
      const double num = w[i] * u[i] * H(i, i);
      v_next[i] = denom > 0.0 ? std::clamp(num / denom, 0.0, v_max) : 0.0;
      change = std::max(change, std::abs(v_next[i] - v[i]));
    }
    v.swap(v_next);
    result.iterations = it + 1;
    if (change < tol) {
      result.converged = true;
      break;
    }
  }
  result.power.resize(m);
  for (std::size_t i = 0; i < m; ++i) result.power[i] = v[i] * v[i];
  return result;
}

std::vector<double> equal_power(std::size_t m, double p_max) {
  if (m == 0) throw std::invalid_argument("equal_power: empty network");
  return std::vector<double>(m, p_max / static_cast<double>(m));
}

std::vector<double> random_selection(std::size_t m, double p_max, double p0, Rng& rng) {
  if (!(p0 > 0.0)) throw std::invalid_argument("random_selection: p0 must be positive");
  if (p_max > static_cast<double>(m) * p0)
    throw std::invalid_argument("random_selection: budget exceeds m * p0, cannot select that many users");
  const auto k = static_cast<std::size_t>(std::floor(p_max / p0));
  // Partial Fisher-Yates: the first k slots form a uniform random k-subset.
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m - i));
    std::swap(idx[i], idx[std::min(j, m - 1)]);
  }
  std::vector<double> p(m, 0.0);
  for (std::size_t i = 0; i < k; ++i) p[idx[i]] = p0;
  return p;
}

BruteForceResult brute_force_binary(const ChannelMatrix& H, double sigma2, double p0) {
  const std::size_t m = H.dim();
  if (m > 16) throw std::invalid_argument("brute_force_binary: m = " + std::to_string(m) + " exceeds the limit of 16");
  const std::uint32_t total = 1u << m;
  std::vector<std::uint32_t> codes(total);
  std::iota(codes.begin(), codes.end(), 0u);
  std::stable_sort(codes.begin(), codes.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });

  BruteForceResult best;
  best.sum_rate = -1.0;
  std::vector<double> p(m);
  for (std::uint32_t code : codes) {
    for (std::size_t i = 0; i < m; ++i) p[i] = (code >> i) & 1u ? p0 : 0.0;
    const double rate = sum_rate(p, H, sigma2);
    if (rate > best.sum_rate) {
      best.sum_rate = rate;
      best.allocation = p;
    }
  }
  return best;
}

std::vector<double> sample_demand(std::size_t m, double mean, Rng& rng) {
  if (!(mean > 0.0)) throw std::invalid_argument("sample_demand: mean must be positive");
  std::vector<double> x(m);
  for (double& v : x) v = sample_exponential(rng, mean);
  return x;
}

std::string to_text(const NetworkModel& model) {
  std::ostringstream out;
  auto points = [&](const std::vector<Point>& pts) {
    out << "[";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out << (i ? ",\n    " : "\n    ") << "[" << format_double(pts[i].x) << ", " << format_double(pts[i].y) << "]";
    out << "\n  ]";
  };
  out << "{\n  \"version\": " << kNetworkFormatVersion << ",\n  \"kind\": \"" << to_string(model.kind)
      << "\",\n  \"m\": " << model.m << ",\n  \"n\": " << model.n << ",\n  \"tx\": ";
  points(model.tx);
  out << ",\n  \"rx\": ";
  points(model.rx);
  out << ",\n  \"pairing\": [";
  for (std::size_t i = 0; i < model.pairing.size(); ++i) out << (i ? ", " : "") << model.pairing[i];
  out << "]\n}\n";
  return out.str();
}

NetworkModel network_from_text(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("version").get<int>() != kNetworkFormatVersion)
      throw std::runtime_error("network file: unsupported version");
    NetworkModel net;
    net.kind = parse_topology(doc.at("kind").get<std::string>());
    net.m = doc.at("m").get<std::size_t>();
    net.n = doc.at("n").get<std::size_t>();
    for (const auto& p : doc.at("tx")) net.tx.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& p : doc.at("rx")) net.rx.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    net.pairing = doc.at("pairing").get<std::vector<std::size_t>>();
    net.validate();
    net.compute_pathloss();
    return net;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("network file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("network file: ") + e.what());
  }
}

void save_network(const NetworkModel& model, const std::string& path) { write_file(path, to_text(model)); }

NetworkModel load_network(const std::string& path) { return network_from_text(read_file(path)); }

}  // namespace regnn::wireless
