// spikesync: simulate, fit and summarize binned spike trains.
//
// Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spikesync/spikesync.hpp"

namespace fs = std::filesystem;
using namespace spikesync;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = default_thread_count();
  std::string out = "out";
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--config", c.config, "TOML or JSON config file");
}

Json config_tree(const Common& c) { return c.config.empty() ? Json::object() : load_config_tree(c.config); }

void check_top_level(const Json& tree, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : tree.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    require(ok, k + ": unknown field");
  }
}

fs::path prepare_out(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

void echo_config(const fs::path& out, const std::string& command, const Common& c, Json body) {
  body["command"] = command;
  body["seed"] = c.seed;
  body["threads"] = c.threads;
  if (!c.config.empty()) body["config_file"] = c.config;
  detail::write_file(out / "config.json", body.dump(2) + "\n");
}

struct DataArgs {
  std::string data;
  std::string events;
  double bin_width = 0.0;
};

void add_data(CLI::App* sub, DataArgs& d) {
  sub->add_option("--data", d.data, "binned ensemble: .json file or directory of <id>.csv");
  sub->add_option("--events", d.events, "spike-time JSON to discretize");
  sub->add_option("--bin-width", d.bin_width, "bin width in seconds (events input, or CSV bin width)");
}

Ensemble load_data(const DataArgs& d) {
  require(d.data.empty() != d.events.empty(), "give exactly one of --data and --events");
  if (!d.events.empty()) {
    require(d.bin_width > 0.0, "--bin-width: required and positive with --events");
    std::size_t collapsed = 0;
    Ensemble e = load_event_times(d.events, d.bin_width, &collapsed);
    if (collapsed > 0) std::cerr << "note: " << collapsed << " spikes shared a bin with another spike\n";
    return e;
  }
  require(fs::exists(d.data), "--data: not found: " + d.data);
  return load_ensemble(d.data, format_from_path(d.data), d.bin_width);
}

Json data_json(const DataArgs& d) {
  return Json{{"data", d.data}, {"events", d.events}, {"bin_width", d.bin_width}};
}

std::size_t neuron_index(const Ensemble& e, const std::string& id) {
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e.neurons[i].neuron_id == id) return i;
  throw ValidationError("--neurons: no neuron with id '" + id + "'");
}

SamplerConfig sampler_from_tree(const Json& tree, const Common& c, SamplerConfig base = {}) {
  SamplerConfig cfg = tree.contains("sampler") ? sampler_from_json(tree.at("sampler"), base) : base;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  return cfg;
}

Json interval_json(const Interval& iv) { return Json::array({iv.lo, iv.hi}); }

Json timings_json(const ChainOutput& ch) {
  return Json{{"latent_s", ch.timings.latent_seconds},
              {"hyper_s", ch.timings.hyper_seconds},
              {"dependence_s", ch.timings.dependence_seconds}};
}

// --------------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& preset_name, const std::string& format) {
  Json tree = config_tree(c);
  check_top_level(tree, {"scenario"});
  ScenarioSpec spec;
  if (tree.contains("scenario")) spec = scenario_from_json(tree.at("scenario"));
  else spec = preset(preset_name.empty() ? "scenario1" : preset_name);
  require(preset_name.empty() || !tree.contains("scenario"), "--preset: cannot be combined with a [scenario] table");
  spec.seed = c.seed;
  Rng rng = make_stream(spec.seed, 0);
  const Ensemble e = simulate_scenario(spec, rng);
  const fs::path out = prepare_out(c);
  if (format == "csv") save_ensemble(e, out / "ensemble", EnsembleFormat::Csv);
  else save_ensemble(e, out / "ensemble.json", EnsembleFormat::Json);
  echo_config(out, "simulate", c, Json{{"scenario", to_json(spec)}, {"format", format}});
  std::cout << "wrote " << e.size() << " neurons, " << spec.trials << " trials x " << spec.grid.bins << " bins to "
            << out.string() << "\n";
  return 0;
}

int cmd_fit_pair(const Common& c, const DataArgs& d, const std::vector<std::string>& ids, bool write_chain) {
  const Json tree = config_tree(c);
  check_top_level(tree, {"sampler"});
  const SamplerConfig cfg = sampler_from_tree(tree, c);
  const Ensemble e = load_data(d);
  std::size_t ia = 0, ib = 1;
  if (!ids.empty()) {
    require(ids.size() == 2, "--neurons: expected two ids");
    ia = neuron_index(e, ids[0]);
    ib = neuron_index(e, ids[1]);
  }
  require(e.size() >= 2, "fit-pair: the data hold fewer than two neurons");
  const PairFitResult r = fit_pair(e.neurons[ia], e.neurons[ib], cfg);

  Json lag = Json::object(), freq = Json::object();
  for (const auto& [k, v] : r.lag_posterior) lag[std::to_string(k)] = v;
  for (const auto& [k, v] : r.lag_frequency) freq[std::to_string(k)] = v;
  const Json summary{{"neurons", {e.neurons[ia].neuron_id, e.neurons[ib].neuron_id}},
                     {"zeta_median", r.zeta_median},
                     {"zeta_ci95", interval_json(r.zeta_ci95)},
                     {"lag_posterior", lag},
                     {"lag_frequency", freq},
                     {"lag_mode", r.lag_mode()},
                     {"significant", r.significant},
                     {"draws", r.chain.draws.rows()},
                     {"timings", timings_json(r.chain)}};
  const fs::path out = prepare_out(c);
  detail::write_file(out / "summary.json", summary.dump(2) + "\n");
  if (write_chain) detail::write_file(out / "chain.csv", chain_to_csv(r.chain));
  echo_config(out, "fit-pair", c, Json{{"sampler", to_json(cfg)}, {"input", data_json(d)}, {"neurons", summary["neurons"]}});
  std::cout << "zeta median " << r.zeta_median << ", 95% interval [" << r.zeta_ci95.lo << ", " << r.zeta_ci95.hi
            << "], " << (r.significant ? "significant" : "not significant") << ", lag mode " << r.lag_mode() << "\n";
  return 0;
}

int cmd_fit_multi(const Common& c, const DataArgs& d, bool write_chain) {
  const Json tree = config_tree(c);
  check_top_level(tree, {"sampler"});
  const SamplerConfig cfg = sampler_from_tree(tree, c);
  const Ensemble e = load_data(d);
  const MultiFitResult r = fit_multi(e, cfg);

  const std::size_t n = e.size();
  Json ids = Json::array();
  for (const auto& nr : e.neurons) ids.push_back(nr.neuron_id);
  Json matrix = Json::array();
  for (std::size_t i = 0; i < n; ++i) matrix.push_back(Json(std::vector<Json>(n, nullptr)));
  Json pairs = Json::array(), edges = Json::array(), adjacency = Json::object();
  for (const auto& id : ids) adjacency[id.get<std::string>()] = Json::array();
  for (const auto& p : r.pairs) {
    const Json cell{{"beta_median", p.median}, {"ci95", interval_json(p.ci95)}, {"significant", p.significant}};
    matrix[p.j1][p.j2] = cell;
    Json entry = cell;
    entry["pair"] = {p.id1, p.id2};
    pairs.push_back(entry);
    if (p.significant) {
      edges.push_back({p.id1, p.id2});
      adjacency[p.id1].push_back(p.id2);
      adjacency[p.id2].push_back(p.id1);
    }
  }
  const fs::path out = prepare_out(c);
  detail::write_file(out / "pairs.json", Json{{"neurons", ids},
                                              {"matrix", matrix},
                                              {"pairs", pairs},
                                              {"acceptance_rate", r.chain.acceptance_rate()},
                                              {"timings", timings_json(r.chain)}}
                                             .dump(2) + "\n");
  detail::write_file(out / "adjacency.json", Json{{"neurons", ids}, {"edges", edges}, {"adjacency", adjacency}}.dump(2) + "\n");
  if (write_chain) detail::write_file(out / "chain.csv", chain_to_csv(r.chain));
  echo_config(out, "fit-multi", c, Json{{"sampler", to_json(cfg)}, {"input", data_json(d)}});
  std::cout << n << " neurons, " << edges.size() << " significant pairs, HMC acceptance " << r.chain.acceptance_rate() << "\n";
  return 0;
}

int cmd_experiment(const Common& c, const std::string& command, ExperimentSpec spec, std::optional<std::size_t> replicates) {
  const Json tree = config_tree(c);
  check_top_level(tree, {"scenario", "sampler", "experiment"});
  spec = experiment_from_json(tree, spec);
  if (replicates) spec.replicates = *replicates;
  spec.validate();
  const ExperimentReport rep = command == "sensitivity" ? sensitivity_experiment(spec, c.seed, c.threads)
                                                        : power_experiment(spec, c.seed, c.threads);
  const fs::path out = prepare_out(c);
  detail::write_file(out / "report.csv", rep.to_csv());
  echo_config(out, command, c, to_json(spec));
  std::cout << rep.to_csv() << "(" << rep.seconds << " s)\n";
  return 0;
}

int cmd_psth(const Common& c, const DataArgs& d, const std::vector<std::string>& ids) {
  const Ensemble e = load_data(d);
  const fs::path out = prepare_out(c);
  for (const auto& n : e.neurons) detail::write_file(out / ("psth_" + n.neuron_id + ".csv"), psth_csv(n));
  std::optional<std::pair<std::size_t, std::size_t>> pair;
  if (!ids.empty()) {
    require(ids.size() == 2, "--neurons: expected two ids");
    pair.emplace(neuron_index(e, ids[0]), neuron_index(e, ids[1]));
  } else if (e.size() == 2) {
    pair.emplace(0, 1);
  }
  if (pair) detail::write_file(out / "jpsth.csv", jpsth_csv(e.neurons[pair->first], e.neurons[pair->second]));
  echo_config(out, "psth", c, Json{{"input", data_json(d)}});
  std::cout << e.size() << " neurons, " << e.bin_count() << " bins\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchrony and dependence analysis for binned spike trains"};
  app.require_subcommand(1);
  Common common;
  DataArgs data;
  std::string preset_name, format = "json", study;
  std::vector<std::string> ids;
  bool no_chain = false;
  std::optional<std::size_t> replicates;

  auto* sim = app.add_subcommand("simulate", "simulate a scenario and write the ensemble");
  add_common(sim, common);
  sim->add_option("--preset", preset_name, "named scenario")->check(CLI::IsMember(preset_names()));
  sim->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  auto* fp = app.add_subcommand("fit-pair", "fit the pairwise synchrony model");
  add_common(fp, common);
  add_data(fp, data);
  fp->add_option("--neurons", ids, "ids of the two neurons")->expected(2)->delimiter(',');
  fp->add_flag("--no-chain", no_chain, "skip chain.csv");

  auto* fm = app.add_subcommand("fit-multi", "fit the copula model to all neurons");
  add_common(fm, common);
  add_data(fm, data);
  fm->add_flag("--no-chain", no_chain, "skip chain.csv");

  auto* pw = app.add_subcommand("power", "power study for the synchrony test");
  add_common(pw, common);
  pw->add_option("--study", study, "sync or regression defaults")->check(CLI::IsMember({"sync", "regression"}));
  pw->add_option("--replicates", replicates, "replicates per setting");

  auto* sens = app.add_subcommand("sensitivity", "bin-flip noise study");
  add_common(sens, common);
  sens->add_option("--replicates", replicates, "replicates per setting");

  auto* ps = app.add_subcommand("psth", "PSTH per neuron, JPSTH for a pair");
  add_common(ps, common);
  add_data(ps, data);
  ps->add_option("--neurons", ids, "ids of the JPSTH pair")->expected(2)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(common, preset_name, format);
    if (*fp) return cmd_fit_pair(common, data, ids, !no_chain);
    if (*fm) return cmd_fit_multi(common, data, !no_chain);
    if (*pw) return cmd_experiment(common, "power", study == "regression" ? default_regression_spec() : default_power_spec(), replicates);
    if (*sens) return cmd_experiment(common, "sensitivity", default_sensitivity_spec(), replicates);
    if (*ps) return cmd_psth(common, data, ids);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
