#include "regnn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "regnn/policy.hpp"
#include "regnn/rng.hpp"
#include "regnn/text.hpp"

namespace regnn::experiment {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads one section of the config, rejecting keys it does not know.
class Section {
 public:
  Section(const json& doc, std::string name, std::initializer_list<std::string_view> keys)
      : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw ConfigError("config: section '" + name_ + "' must be an object");
    for (const auto& item : node_->items()) {
      if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
        throw ConfigError("config: unknown key '" + name_ + "." + item.key() + "'");
    }
  }

  const json* find(std::string_view key) const {
    if (node_ == nullptr) return nullptr;
    const auto it = node_->find(std::string(key));
    if (it == node_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string field(std::string_view key) const { return name_ + "." + std::string(key); }

  void read(std::string_view key, double& out) const {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError("config: " + field(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(std::string_view key, std::size_t& out) const {
    if (const json* v = find(key)) out = as_count(*v, field(key));
  }
  void read(std::string_view key, bool& out) const {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError("config: " + field(key) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void read(std::string_view key, std::string& out) const {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError("config: " + field(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  static std::uint64_t as_count(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError("config: " + field + " must be a nonnegative integer");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
};

std::vector<std::size_t> count_list(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError("config: " + field + " must be an integer or a list of integers");
  std::vector<std::size_t> out;
  for (const json& e : v) out.push_back(Section::as_count(e, field));
  return out;
}

template <class F>
void rethrow_as_config(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

std::size_t ExperimentConfig::receivers() const {
  if (network.topology == wireless::Topology::adhoc) return network.m;
  return network.n;
}

wireless::ProblemSpec ExperimentConfig::problem_spec(std::size_t m) const {
  wireless::ProblemSpec p;
  p.sigma2 = problem.sigma2;
  p.spec.p0 = problem.p0;
  p.variant = problem.variant;
  p.demand_mean = problem.demand_mean;
  p.rayleigh_scale = problem.rayleigh_scale;
  const double users = static_cast<double>(m);
  p.p_max = problem.p_max ? *problem.p_max * users / static_cast<double>(network.m) : users * problem.p0 / 2.0;
  return p;
}

train::TrainConfig ExperimentConfig::train_config() const {
  train::TrainConfig t = train;
  t.eval_every = output.eval_every;
  t.eval_samples = output.eval_samples;
  return t;
}

void ExperimentConfig::validate() const {
  rethrow_as_config([&] {
    if (network.m < 2) throw std::invalid_argument("network.m must be at least 2");
    if (!(network.density_factor > 0.0)) throw std::invalid_argument("network.density_factor must be positive");
    if (network.topology == wireless::Topology::adhoc) {
      if (network.n != 0 && network.n != network.m)
        throw std::invalid_argument("network.n must equal network.m for adhoc networks");
    } else {
      if (network.n == 0) throw std::invalid_argument("network.n is required for multicell networks");
      if (network.m % network.n != 0) throw std::invalid_argument("network.n must divide network.m");
    }
    if (problem.p_max && !(*problem.p_max > 0.0)) throw std::invalid_argument("problem.p_max must be positive");
    problem_spec(network.m).validate();
    regnn.validate();
    train_config().validate();
    if (output.directory.empty()) throw std::invalid_argument("output.directory must not be empty");
  });
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& item : doc.items()) {
    static const std::string_view known[] = {"network", "problem", "regnn", "train", "output"};
    if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known))
      throw ConfigError("config: unknown section '" + item.key() + "'");
  }

  ExperimentConfig c;

  const Section net(doc, "network", {"topology", "m", "n", "density_factor", "size_ref", "seed"});
  std::string topology(wireless::to_string(c.network.topology));
  net.read("topology", topology);
  rethrow_as_config([&] { c.network.topology = wireless::parse_topology(topology); });
  net.read("m", c.network.m);
  net.read("n", c.network.n);
  net.read("density_factor", c.network.density_factor);
  net.read("size_ref", c.network.size_ref);
  if (const json* s = net.find("seed")) c.network.seed = Section::as_count(*s, "network.seed");

  const Section prob(doc, "problem", {"variant", "sigma2", "p_max", "p0", "demand_mean", "rayleigh_scale"});
  std::string variant(wireless::to_string(c.problem.variant));
  prob.read("variant", variant);
  rethrow_as_config([&] { c.problem.variant = wireless::parse_variant(variant); });
  prob.read("sigma2", c.problem.sigma2);
  if (prob.find("p_max")) {
    double p = 0.0;
    prob.read("p_max", p);
    c.problem.p_max = p;
  }
  prob.read("p0", c.problem.p0);
  prob.read("demand_mean", c.problem.demand_mean);
  prob.read("rayleigh_scale", c.problem.rayleigh_scale);

  const Section reg(doc, "regnn", {"layers", "features", "taps", "nonlinearity"});
  std::size_t layers = 8;
  reg.read("layers", layers);
  std::vector<std::size_t> features, taps;
  if (const json* f = reg.find("features")) {
    if (f->is_array()) {
      features = count_list(*f, "regnn.features");
      if (!reg.find("layers") && !features.empty()) layers = features.size() - 1;
    } else {
      const std::size_t width = Section::as_count(*f, "regnn.features");
      features.assign(layers + 1, width);
      features.front() = features.back() = 1;
    }
  }
  if (const json* k = reg.find("taps")) {
    if (k->is_array()) {
      taps = count_list(*k, "regnn.taps");
      if (!reg.find("layers") && !reg.find("features")) layers = taps.size();
    } else {
      taps.assign(layers, Section::as_count(*k, "regnn.taps"));
    }
  }
  if (features.empty()) {
    features.assign(layers + 1, 1);
  }
  if (taps.empty()) taps.assign(layers, 5);
  if (features.size() != layers + 1)
    throw ConfigError("config: regnn.features must list layers + 1 feature counts");
  if (taps.size() != layers) throw ConfigError("config: regnn.taps must list one filter length per layer");
  c.regnn.features = features;
  c.regnn.taps = taps;
  std::string nonlinearity(gnn::to_string(c.regnn.hidden));
  reg.read("nonlinearity", nonlinearity);
  rethrow_as_config([&] { c.regnn.hidden = gnn::parse_nonlinearity(nonlinearity); });

  const Section tr(doc, "train",
                   {"iters", "primal_step", "dual_step0", "dual_decay", "adam_beta1", "adam_beta2", "adam_eps",
                    "batch", "seed", "reward_baseline", "baseline_decay", "warm_start", "reward_damping",
                    "reward_step", "init_range", "init_identity"});
  tr.read("iters", c.train.iters);
  tr.read("primal_step", c.train.primal_step);
  tr.read("dual_step0", c.train.dual_step0);
  tr.read("dual_decay", c.train.dual_decay);
  tr.read("adam_beta1", c.train.adam_beta1);
  tr.read("adam_beta2", c.train.adam_beta2);
  tr.read("adam_eps", c.train.adam_eps);
  tr.read("batch", c.train.batch);
  if (const json* s = tr.find("seed")) c.train.seed = Section::as_count(*s, "train.seed");
  tr.read("reward_baseline", c.train.reward_baseline);
  tr.read("baseline_decay", c.train.baseline_decay);
  tr.read("warm_start", c.train.warm_start);
  tr.read("reward_damping", c.train.reward_damping);
  tr.read("reward_step", c.train.reward_step);
  tr.read("init_range", c.train.init_range);
  tr.read("init_identity", c.train.init_identity);

  const Section out(doc, "output", {"directory", "eval_every", "eval_samples"});
  out.read("directory", c.output.directory);
  out.read("eval_every", c.output.eval_every);
  out.read("eval_samples", c.output.eval_samples);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(text);
}

namespace {

json config_document(const ExperimentConfig& c) {
  json net = {{"topology", wireless::to_string(c.network.topology)},
              {"m", c.network.m},
              {"n", c.receivers()},
              {"density_factor", c.network.density_factor},
              {"size_ref", c.network.size_ref == 0 ? c.network.m : c.network.size_ref},
              {"seed", c.topology_seed()}};
  json prob = {{"variant", wireless::to_string(c.problem.variant)},
               {"sigma2", c.problem.sigma2},
               {"p_max", c.problem_spec(c.network.m).p_max},
               {"p0", c.problem.p0},
               {"demand_mean", c.problem.demand_mean},
               {"rayleigh_scale", c.problem.rayleigh_scale}};
  json reg = {{"layers", c.regnn.layers()},
              {"features", c.regnn.features},
              {"taps", c.regnn.taps},
              {"nonlinearity", gnn::to_string(c.regnn.hidden)}};
  const train::TrainConfig& t = c.train;
  json tr = {{"iters", t.iters},
             {"primal_step", t.primal_step},
             {"dual_step0", t.dual_step0},
             {"dual_decay", t.dual_decay},
             {"adam_beta1", t.adam_beta1},
             {"adam_beta2", t.adam_beta2},
             {"adam_eps", t.adam_eps},
             {"batch", t.batch},
             {"seed", t.seed},
             {"reward_baseline", t.reward_baseline},
             {"baseline_decay", t.baseline_decay},
             {"warm_start", t.warm_start},
             {"reward_damping", t.reward_damping},
             {"reward_step", t.reward_step},
             {"init_range", t.init_range},
             {"init_identity", t.init_identity}};
  json out = {{"directory", c.output.directory},
              {"eval_every", c.output.eval_every},
              {"eval_samples", c.output.eval_samples}};
  return {{"network", net}, {"problem", prob}, {"regnn", reg}, {"train", tr}, {"output", out}};
}

}  // namespace

std::string to_json(const ExperimentConfig& config) { return config_document(config).dump(2) + "\n"; }

// The output directory says where results go, not what they are, so it is left out.
std::uint64_t config_hash(const ExperimentConfig& config) {
  json doc = config_document(config);
  doc["output"].erase("directory");
  return fnv1a(doc.dump(2));
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string csv_comment(std::uint64_t seed, std::uint64_t hash) {
  return "# seed=" + std::to_string(seed) + " config_hash=" + hash_hex(hash) + "\n";
}

wireless::NetworkModel make_network(const ExperimentConfig& config, std::size_t m, double density_factor,
                                    std::size_t size_ref, Rng& rng) {
  if (config.network.topology == wireless::Topology::adhoc)
    return wireless::generate_adhoc(m, rng, density_factor, size_ref);
  const std::size_t per_cell = config.network.m / config.receivers();
  if (m % per_cell != 0)
    throw std::invalid_argument("multicell network of " + std::to_string(m) + " users cannot keep " +
                                std::to_string(per_cell) + " users per cell");
  return wireless::generate_multicell(m, m / per_cell, rng, density_factor, size_ref);
}

wireless::NetworkModel make_network(const ExperimentConfig& config) {
  Rng rng = make_stream(config.topology_seed(), stream::topology);
  return make_network(config, config.network.m, config.network.density_factor, config.network.size_ref, rng);
}

// ---- train ----

std::string train_csv(const train::TrainReport& report, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream out;
  out << csv_comment(seed, hash);
  const std::size_t slacks = report.records.empty() ? 0 : report.records.front().slack.size();
  out << "iteration,objective_nats,sum_rate_nats,threshold_sum_rate_nats,mean_power_w,lambda_norm,mu_norm,"
         "min_slack,satisfied";
  for (std::size_t c = 0; c < slacks; ++c) out << ",slack_" << c + 1;
  out << "\n";
  for (const train::EvalRecord& r : report.records) {
    const double min_slack = r.slack.empty() ? 0.0 : *std::min_element(r.slack.begin(), r.slack.end());
    const auto satisfied = std::count_if(r.slack.begin(), r.slack.end(), [](double s) { return s >= 0.0; });
    out << r.iteration << ',' << format_double(r.objective) << ',' << format_double(r.sum_rate) << ','
        << format_double(r.threshold_sum_rate) << ',' << format_double(r.mean_power) << ','
        << format_double(r.lambda_norm) << ',' << format_double(r.mu_norm) << ',' << format_double(min_slack)
        << ',' << satisfied;
    for (double s : r.slack) out << ',' << format_double(s);
    out << "\n";
  }
  return out.str();
}

TrainArtifacts run_train(const ExperimentConfig& config, const std::string& dir,
                         const std::optional<wireless::NetworkModel>& network) {
  config.validate();
  const wireless::NetworkModel net = network ? *network : make_network(config);
  const wireless::ProblemSpec spec = config.problem_spec(net.m);
  train::TrainResult result = train::train(net, spec, config.regnn, config.train_config());

  fs::create_directories(dir);
  const std::uint64_t hash = config_hash(config);
  TrainArtifacts a{(fs::path(dir) / "checkpoint.json").string(), (fs::path(dir) / "train.csv").string(),
                   (fs::path(dir) / "run.json").string(), (fs::path(dir) / "network.json").string(),
                   std::move(result)};
  gnn::save_checkpoint(a.result.A, a.checkpoint);
  write_file(a.metrics_csv, train_csv(a.result.report, config.seed(), hash));
  wireless::save_network(net, a.network);

  json header = {{"config", config_document(config)},
                 {"seed", config.seed()},
                 {"config_hash", hash_hex(hash)},
                 {"network_users", net.m},
                 {"network_receivers", net.n},
                 {"p_max", spec.p_max},
                 {"num_params", gnn::num_params(config.regnn)},
                 {"artifacts",
                  {{"checkpoint", "checkpoint.json"}, {"metrics", "train.csv"}, {"network", "network.json"}}}};
  if (!a.result.report.records.empty()) {
    const train::EvalRecord& last = a.result.report.records.back();
    header["final"] = {{"iteration", last.iteration},
                       {"objective_nats", last.objective},
                       {"sum_rate_nats", last.sum_rate},
                       {"mean_power_w", last.mean_power}};
  }
  write_file(a.run_header, header.dump(2) + "\n");
  return a;
}

// ---- eval ----

std::vector<PairedDraw> paired_evaluation(const gnn::FilterTensor& A, const wireless::NetworkModel& network,
                                          const wireless::ProblemSpec& problem, std::size_t samples,
                                          std::uint64_t seed) {
  problem.validate();
  Rng fading = make_stream(seed, stream::fading_eval);
  Rng demand = make_stream(seed, stream::demand_eval);
  Rng pol = make_stream(seed, stream::policy_eval);
  Rng base = make_stream(seed, stream::baseline);
  const std::size_t m = network.m;
  const std::vector<double> equal = wireless::equal_power(m, problem.p_max);
  std::vector<PairedDraw> out;
  out.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const train::StateSample st = train::sample_state(network, problem, fading, demand, s);
    const gnn::ForwardTape tape = gnn::forward(A, st.H, graph::GraphSignal(st.x));
    const policy::PolicySample draw = policy::sample(tape.probs(), problem.spec, pol);
    PairedDraw d;
    d.draw = s;
    d.regnn_sampled = wireless::sum_rate(draw.allocation, st.H, problem.sigma2);
    d.regnn_threshold = wireless::sum_rate(policy::threshold(tape.probs(), problem.spec), st.H, problem.sigma2);
    d.wmmse = wireless::sum_rate(wireless::wmmse(st.H, problem.sigma2, problem.spec.p0).power, st.H, problem.sigma2);
    d.equal = wireless::sum_rate(equal, st.H, problem.sigma2);
    d.random = wireless::sum_rate(wireless::random_selection(m, problem.p_max, problem.spec.p0, base), st.H,
                                  problem.sigma2);
    out.push_back(d);
  }
  return out;
}

PairedMeans means(std::span<const PairedDraw> draws) {
  PairedMeans m;
  if (draws.empty()) return m;
  for (const PairedDraw& d : draws) {
    m.regnn_sampled += d.regnn_sampled;
    m.regnn_threshold += d.regnn_threshold;
    m.wmmse += d.wmmse;
    m.equal += d.equal;
    m.random += d.random;
  }
  const double n = static_cast<double>(draws.size());
  m.regnn_sampled /= n;
  m.regnn_threshold /= n;
  m.wmmse /= n;
  m.equal /= n;
  m.random /= n;
  return m;
}

std::string eval_csv(std::span<const PairedDraw> draws, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream out;
  out << csv_comment(seed, hash);
  out << "draw,regnn_sampled_nats,regnn_threshold_nats,wmmse_nats,equal_nats,random_nats\n";
  for (const PairedDraw& d : draws)
    out << d.draw << ',' << format_double(d.regnn_sampled) << ',' << format_double(d.regnn_threshold) << ','
        << format_double(d.wmmse) << ',' << format_double(d.equal) << ',' << format_double(d.random) << "\n";
  return out.str();
}

// ---- baseline ----

std::vector<BaselineDraw> baseline_evaluation(const wireless::NetworkModel& network,
                                              const wireless::ProblemSpec& problem, std::size_t samples,
                                              std::uint64_t seed) {
  problem.validate();
  Rng fading = make_stream(seed, stream::fading_eval);
  Rng base = make_stream(seed, stream::baseline);
  const std::size_t m = network.m;
  const std::vector<double> equal = wireless::equal_power(m, problem.p_max);
  std::vector<BaselineDraw> out;
  out.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const graph::ChannelMatrix H = wireless::sample_fading(network, fading, problem.rayleigh_scale, s).H;
    const wireless::WmmseResult w = wireless::wmmse(H, problem.sigma2, problem.spec.p0);
    BaselineDraw d;
    d.draw = s;
    d.wmmse = wireless::sum_rate(w.power, H, problem.sigma2);
    d.equal = wireless::sum_rate(equal, H, problem.sigma2);
    d.random = wireless::sum_rate(wireless::random_selection(m, problem.p_max, problem.spec.p0, base), H,
                                  problem.sigma2);
    d.wmmse_iterations = w.iterations;
    d.wmmse_converged = w.converged;
    out.push_back(d);
  }
  return out;
}

std::string baseline_csv(std::span<const BaselineDraw> draws, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream out;
  out << csv_comment(seed, hash);
  out << "draw,wmmse_nats,equal_nats,random_nats,wmmse_iterations,wmmse_converged\n";
  for (const BaselineDraw& d : draws)
    out << d.draw << ',' << format_double(d.wmmse) << ',' << format_double(d.equal) << ','
        << format_double(d.random) << ',' << d.wmmse_iterations << ',' << (d.wmmse_converged ? 1 : 0) << "\n";
  return out.str();
}

// ---- transfer ----

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  const double rank = std::ceil(q * static_cast<double>(sorted.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

TransferRow summarize(std::size_t m, std::string policy, std::vector<double> values, std::size_t networks,
                      std::size_t samples) {
  TransferRow row{m, std::move(policy), networks, samples};
  if (values.empty()) return row;
  const double n = static_cast<double>(values.size());
  row.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - row.mean) * (v - row.mean);
  row.std_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  std::sort(values.begin(), values.end());
  row.p10 = nearest_rank(values, 0.10);
  row.p50 = nearest_rank(values, 0.50);
  row.p90 = nearest_rank(values, 0.90);
  return row;
}

}  // namespace

std::vector<TransferRow> run_transfer(const gnn::FilterTensor& A, const ExperimentConfig& config,
                                      const TransferOptions& options) {
  if (!(options.density_factor > 0.0)) throw std::invalid_argument("transfer: density must be positive");
  const std::size_t size_ref = config.network.size_ref == 0 ? config.network.m : config.network.size_ref;
  std::vector<TransferRow> rows;
  if (options.networks == 0) return rows;
  for (std::size_t m : options.sizes) {
    std::vector<double> sampled, thresh, wm, eq, rnd;
    for (std::size_t j = 0; j < options.networks; ++j) {
      const std::uint64_t sub = derive_seed(config.seed(), "transfer", (static_cast<std::uint64_t>(m) << 32) | j);
      Rng topo = make_stream(sub, stream::topology);
      const wireless::NetworkModel net = make_network(config, m, options.density_factor, size_ref, topo);
      const std::vector<PairedDraw> draws =
          paired_evaluation(A, net, config.problem_spec(m), options.samples, sub);
      for (const PairedDraw& d : draws) {
        sampled.push_back(d.regnn_sampled);
        thresh.push_back(d.regnn_threshold);
        wm.push_back(d.wmmse);
        eq.push_back(d.equal);
        rnd.push_back(d.random);
      }
    }
    rows.push_back(summarize(m, "regnn_sampled", std::move(sampled), options.networks, options.samples));
    rows.push_back(summarize(m, "regnn_threshold", std::move(thresh), options.networks, options.samples));
    rows.push_back(summarize(m, "wmmse", std::move(wm), options.networks, options.samples));
    rows.push_back(summarize(m, "equal", std::move(eq), options.networks, options.samples));
    rows.push_back(summarize(m, "random", std::move(rnd), options.networks, options.samples));
  }
  return rows;
}

std::string transfer_csv(std::span<const TransferRow> rows, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream out;
  out << csv_comment(seed, hash);
  out << "m,policy,networks,samples_per_network,mean_nats,std_error_nats,p10_nats,p50_nats,p90_nats\n";
  for (const TransferRow& r : rows)
    out << r.m << ',' << r.policy << ',' << r.networks << ',' << r.samples << ',' << format_double(r.mean) << ','
        << format_double(r.std_error) << ',' << format_double(r.p10) << ',' << format_double(r.p50) << ','
        << format_double(r.p90) << "\n";
  return out.str();
}

}  // namespace regnn::experiment
