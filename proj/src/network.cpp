#include "regnn/network.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "regnn/numeric.hpp"
#include "regnn/text.hpp"

namespace regnn::gnn {

using graph::ChannelMatrix;
using graph::GraphSignal;
using json = nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

Nonlinearity layer_nonlinearity(const RegnnConfig& config, std::size_t layer) {
  return layer + 1 == config.layers() ? Nonlinearity::sigmoid : config.hidden;
}

}  // namespace

std::string_view to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::relu: return "relu";
    case Nonlinearity::abs: return "abs";
    case Nonlinearity::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "relu") return Nonlinearity::relu;
  if (name == "abs") return Nonlinearity::abs;
  if (name == "sigmoid") return Nonlinearity::sigmoid;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "' (expected relu, abs or sigmoid)");
}

double activate(Nonlinearity n, double y) {
  switch (n) {
    case Nonlinearity::relu: return y > 0.0 ? y : 0.0;
    case Nonlinearity::abs: return std::abs(y);
    case Nonlinearity::sigmoid: return sigmoid(y);
  }
  return y;
}

double activate_derivative(Nonlinearity n, double y) {
  switch (n) {
    case Nonlinearity::relu: return y > 0.0 ? 1.0 : 0.0;
    case Nonlinearity::abs: return y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
    case Nonlinearity::sigmoid: {
      const double s = sigmoid(y);
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

void RegnnConfig::validate() const {
  if (taps.empty()) throw std::invalid_argument("RegnnConfig: need at least one layer");
  if (features.size() != taps.size() + 1)
    throw std::invalid_argument("RegnnConfig: expected " + std::to_string(taps.size() + 1) +
                                " feature counts (F_0..F_L), got " + std::to_string(features.size()));
  if (features.front() != 1 || features.back() != 1)
    throw std::invalid_argument("RegnnConfig: input and output layers must carry a single feature");
  for (std::size_t f : features)
    if (f == 0) throw std::invalid_argument("RegnnConfig: feature counts must be at least 1");
  for (std::size_t k : taps)
    if (k == 0) throw std::invalid_argument("RegnnConfig: filter lengths must be at least 1");
}

RegnnConfig RegnnConfig::uniform(std::size_t layers, std::size_t features, std::size_t taps, Nonlinearity hidden) {
  RegnnConfig c;
  c.features.assign(layers + 1, features);
  c.features.front() = 1;
  c.features.back() = 1;
  c.taps.assign(layers, taps);
  c.hidden = hidden;
  return c;
}

std::size_t num_params(const RegnnConfig& config) {
  std::size_t q = 0;
  for (std::size_t l = 0; l < config.layers(); ++l) q += config.taps[l] * config.features[l] * config.features[l + 1];
  return q;
}

FilterTensor::FilterTensor(RegnnConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < config_.layers(); ++l) {
    layer_offsets_.push_back(offset);
    offset += config_.taps[l] * config_.features[l] * config_.features[l + 1];
  }
  flat_.assign(offset, 0.0);
}

FilterTensor::FilterTensor(RegnnConfig config, std::vector<double> flat) : FilterTensor(std::move(config)) {
  if (flat.size() != flat_.size())
    throw std::invalid_argument("FilterTensor: expected " + std::to_string(flat_.size()) + " taps, got " +
                                std::to_string(flat.size()));
  if (!all_finite(flat)) throw std::invalid_argument("FilterTensor: taps must be finite");
  flat_ = std::move(flat);
}

FilterTensor FilterTensor::random_uniform(RegnnConfig config, double range, Rng& rng) {
  FilterTensor A(std::move(config));
  for (double& a : A.flat_) a = range * (2.0 * uniform01(rng) - 1.0);
  return A;
}

std::size_t FilterTensor::offset(std::size_t layer, std::size_t in_feature, std::size_t out_feature) const {
  const std::size_t K = config_.taps[layer];
  const std::size_t G = config_.features[layer + 1];
  return layer_offsets_[layer] + (in_feature * G + out_feature) * K;
}

std::span<const double> FilterTensor::taps(std::size_t layer, std::size_t in_feature, std::size_t out_feature) const {
  return {flat_.data() + offset(layer, in_feature, out_feature), config_.taps[layer]};
}

std::span<double> FilterTensor::taps(std::size_t layer, std::size_t in_feature, std::size_t out_feature) {
  return {flat_.data() + offset(layer, in_feature, out_feature), config_.taps[layer]};
}

ForwardTape forward(const FilterTensor& A, const ChannelMatrix& H, const GraphSignal& x) {
  const RegnnConfig& config = A.config();
  if (x.features() != 1) throw std::invalid_argument("forward: input must be a single-feature signal");
  if (x.dim() != H.dim())
    throw std::invalid_argument("forward: dimension mismatch, channel matrix is " + std::to_string(H.dim()) +
                                " nodes but input has " + std::to_string(x.dim()));
  const std::size_t m = H.dim();

  ForwardTape tape;
  tape.dim = m;
  tape.layers.reserve(config.layers());
  GraphSignal z = x;
  for (std::size_t l = 0; l < config.layers(); ++l) {
    const std::size_t F_in = config.features[l];
    const std::size_t F_out = config.features[l + 1];
    const std::size_t K = config.taps[l];
    const Nonlinearity sigma = layer_nonlinearity(config, l);

    LayerTape layer;
    layer.powers.reserve(F_in);
    for (std::size_t f = 0; f < F_in; ++f) layer.powers.push_back(graph::shifted_powers(H, z.feature(f), K));

    layer.preactivation = GraphSignal(m, F_out);
    for (std::size_t g = 0; g < F_out; ++g) {
      auto y = layer.preactivation.feature(g);
      for (std::size_t f = 0; f < F_in; ++f) {
        const auto alpha = A.taps(l, f, g);
        for (std::size_t k = 0; k < K; ++k) {
          const auto& s = layer.powers[f][k];
          for (std::size_t i = 0; i < m; ++i) y[i] += alpha[k] * s[i];
        }
      }
    }
    if (!all_finite(layer.preactivation.values()))
      throw NumericError(l + 1, "forward: non-finite activation in layer " + std::to_string(l + 1));

    layer.output = GraphSignal(m, F_out);
    for (std::size_t g = 0; g < F_out; ++g) {
      const auto y = layer.preactivation.feature(g);
      auto out = layer.output.feature(g);
      for (std::size_t i = 0; i < m; ++i) out[i] = activate(sigma, y[i]);
    }
    layer.input = std::move(z);
    z = layer.output;
    tape.layers.push_back(std::move(layer));
  }
  return tape;
}

std::vector<double> backward(const ForwardTape& tape, const FilterTensor& A, const ChannelMatrix& H,
                             std::span<const double> grad_out) {
  const RegnnConfig& config = A.config();
  const std::size_t m = tape.dim;
  if (tape.layers.size() != config.layers() || H.dim() != m || grad_out.size() != m)
    throw std::invalid_argument("backward: tape, parameters, channel matrix and output gradient disagree in shape");
  for (std::size_t l = 0; l < config.layers(); ++l)
    if (tape.layers[l].powers.size() != config.features[l] ||
        tape.layers[l].preactivation.features() != config.features[l + 1] ||
        (!tape.layers[l].powers.empty() && tape.layers[l].powers[0].size() != config.taps[l]))
      throw std::invalid_argument("backward: tape layer " + std::to_string(l + 1) +
                                  " does not match the filter tensor configuration");

  std::vector<double> grad(A.size(), 0.0);
  // Gradient with respect to the current layer's output z_l.
  GraphSignal dz(m, 1, std::vector<double>(grad_out.begin(), grad_out.end()));
  std::vector<double> delta(m), cur(m), next(m);

  for (std::size_t l = config.layers(); l-- > 0;) {
    const LayerTape& layer = tape.layers[l];
    const std::size_t F_in = config.features[l];
    const std::size_t F_out = config.features[l + 1];
    const std::size_t K = config.taps[l];
    const Nonlinearity sigma = layer_nonlinearity(config, l);

    GraphSignal dz_prev(m, F_in);
    for (std::size_t g = 0; g < F_out; ++g) {
      const auto y = layer.preactivation.feature(g);
      const auto up = dz.feature(g);
      for (std::size_t i = 0; i < m; ++i) delta[i] = up[i] * activate_derivative(sigma, y[i]);

      for (std::size_t f = 0; f < F_in; ++f) {
        const std::size_t base = A.offset(l, f, g);
        for (std::size_t k = 0; k < K; ++k) {
          const auto& s = layer.powers[f][k];
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += delta[i] * s[i];
          grad[base + k] = acc;
        }
      }
      if (l == 0) continue;  // no gradient needed for the input signal

      // Adjoint of z -> sum_k alpha_k H^k z is d -> sum_k alpha_k (H^T)^k d.
      cur = delta;
      for (std::size_t k = 0; k < K; ++k) {
        if (k > 0) {
          graph::multiply_transposed(H, cur, next);
          std::swap(cur, next);
        }
        for (std::size_t f = 0; f < F_in; ++f) {
          const double alpha = A.taps(l, f, g)[k];
          auto out = dz_prev.feature(f);
          for (std::size_t i = 0; i < m; ++i) out[i] += alpha * cur[i];
        }
      }
    }
    dz = std::move(dz_prev);
  }
  return grad;
}

std::string to_checkpoint(const FilterTensor& A) {
  const RegnnConfig& c = A.config();
  std::ostringstream out;
  out << "{\n  \"format_version\": " << kCheckpointVersion << ",\n  \"config\": {\n    \"features\": [";
  for (std::size_t i = 0; i < c.features.size(); ++i) out << (i ? ", " : "") << c.features[i];
  out << "],\n    \"taps\": [";
  for (std::size_t i = 0; i < c.taps.size(); ++i) out << (i ? ", " : "") << c.taps[i];
  out << "],\n    \"hidden\": \"" << to_string(c.hidden) << "\",\n    \"output\": \"sigmoid\"\n  },\n";
  out << "  \"taps\": [";
  const auto flat = A.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) out << (i ? ",\n    " : "\n    ") << format_double(flat[i]);
  out << "\n  ]\n}\n";
  return out.str();
}

FilterTensor from_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed document: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw std::runtime_error("checkpoint: unsupported format_version " + std::to_string(version));
    const json& cfg = doc.at("config");
    RegnnConfig config;
    config.features = cfg.at("features").get<std::vector<std::size_t>>();
    config.taps = cfg.at("taps").get<std::vector<std::size_t>>();
    config.hidden = parse_nonlinearity(cfg.at("hidden").get<std::string>());
    if (cfg.contains("output") && cfg.at("output").get<std::string>() != "sigmoid")
      throw std::runtime_error("checkpoint: only the sigmoid output layer is supported");
    return FilterTensor(std::move(config), doc.at("taps").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const FilterTensor& A, const std::string& path) { write_file(path, to_checkpoint(A)); }

FilterTensor load_checkpoint(const std::string& path) { return from_checkpoint(read_file(path)); }

}  // namespace regnn::gnn
