#pragma once

// Multi-trial binary spike trains: data model, binning of raw spike times,
// PSTH/JPSTH summaries, and file ingestion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "spikesync/errors.hpp"

namespace spikesync {

/// Trials x bins matrix of 0/1 entries.
using SpikeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform grid of bin centres on [0, 1].
inline Eigen::VectorXd normalized_grid(Eigen::Index bins) {
  Eigen::VectorXd t(bins);
  for (Eigen::Index k = 0; k < bins; ++k) t[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(bins);
  return t;
}

struct SpikeTrainSet {
  std::string neuron_id;
  SpikeMatrix trials;
  double bin_width = 1.0; // seconds, reporting only
  Eigen::VectorXd t_grid;

  Eigen::Index trial_count() const { return trials.rows(); }
  Eigen::Index bin_count() const { return trials.cols(); }

  /// Number of spikes per bin summed over trials.
  Eigen::VectorXd spike_counts() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(bin_count());
    for (Eigen::Index r = 0; r < trial_count(); ++r)
      for (Eigen::Index t = 0; t < bin_count(); ++t) s[t] += trials(r, t);
    return s;
  }

  void validate() const {
    require(bin_width > 0.0, "neuron '" + neuron_id + "': bin_width must be positive");
    require(t_grid.size() == bin_count(), "neuron '" + neuron_id + "': t_grid length " +
                                              std::to_string(t_grid.size()) + " != bin count " +
                                              std::to_string(bin_count()));
    for (Eigen::Index t = 1; t < t_grid.size(); ++t)
      require(t_grid[t] > t_grid[t - 1], "neuron '" + neuron_id + "': t_grid must be strictly increasing");
    for (Eigen::Index r = 0; r < trials.rows(); ++r)
      for (Eigen::Index t = 0; t < trials.cols(); ++t)
        require(trials(r, t) <= 1, "neuron '" + neuron_id + "': entries must be 0 or 1");
  }
};

inline SpikeTrainSet make_spike_train(std::string id, SpikeMatrix trials, double bin_width = 0.0) {
  SpikeTrainSet s;
  s.neuron_id = std::move(id);
  s.t_grid = normalized_grid(trials.cols());
  s.bin_width = bin_width > 0.0 ? bin_width : (trials.cols() > 0 ? 1.0 / static_cast<double>(trials.cols()) : 1.0);
  s.trials = std::move(trials);
  return s;
}

struct Ensemble {
  std::vector<SpikeTrainSet> neurons;
  std::string condition_label;

  std::size_t size() const { return neurons.size(); }
  Eigen::Index trial_count() const { return neurons.empty() ? 0 : neurons.front().trial_count(); }
  Eigen::Index bin_count() const { return neurons.empty() ? 0 : neurons.front().bin_count(); }

  void validate() const {
    require(!neurons.empty(), "ensemble has no neurons");
    const auto& ref = neurons.front();
    for (const auto& n : neurons) {
      n.validate();
      require(n.trial_count() == ref.trial_count() && n.bin_count() == ref.bin_count(),
              "neuron '" + n.neuron_id + "' shape differs from '" + ref.neuron_id + "'");
      require(n.bin_width == ref.bin_width, "neuron '" + n.neuron_id + "' has a different bin width");
      require(n.t_grid == ref.t_grid, "neuron '" + n.neuron_id + "' has a different time grid");
    }
  }
};

/// Raw spike timestamps (seconds) per trial.
struct EventTimesRecord {
  std::vector<std::vector<double>> trials;
  double trial_duration = 0.0;
};

struct DiscretizeResult {
  SpikeTrainSet data;
  std::size_t collapsed_spikes = 0; // extra spikes merged into an occupied bin
  std::size_t dropped_spikes = 0;   // spikes in the trailing partial bin
};

/// Bin t (0-based) is 1 iff at least one spike lies in [t*w, (t+1)*w). A
/// trailing partial bin is dropped; the time grid is normalized to [0, 1].
inline DiscretizeResult discretize(const EventTimesRecord& raw, double bin_width, std::string neuron_id = "neuron") {
  require(bin_width > 0.0 && std::isfinite(bin_width), "bin_width must be positive");
  require(!raw.trials.empty(), "event record has no trials");
  require(raw.trial_duration > 0.0, "trial_duration must be positive");
  const auto bins = static_cast<Eigen::Index>(std::floor(raw.trial_duration / bin_width + 1e-9));
  require(bins >= 1, "trial_duration is shorter than one bin");

  DiscretizeResult out;
  SpikeMatrix m = SpikeMatrix::Zero(static_cast<Eigen::Index>(raw.trials.size()), bins);
  for (std::size_t r = 0; r < raw.trials.size(); ++r) {
    double prev = -1.0;
    for (double ts : raw.trials[r]) {
      require(ts >= 0.0 && ts <= raw.trial_duration,
              "trial " + std::to_string(r) + ": timestamp outside [0, trial_duration]");
      require(ts >= prev, "trial " + std::to_string(r) + ": timestamps must be nondecreasing");
      prev = ts;
      const auto bin = static_cast<Eigen::Index>(std::floor(ts / bin_width + 1e-9));
      if (bin >= bins) {
        ++out.dropped_spikes;
        continue;
      }
      auto& cell = m(static_cast<Eigen::Index>(r), bin);
      if (cell) ++out.collapsed_spikes;
      cell = 1;
    }
  }
  out.data = make_spike_train(std::move(neuron_id), std::move(m), bin_width);
  return out;
}

/// Per-bin fraction of trials with a spike.
inline Eigen::VectorXd psth(const SpikeTrainSet& data) {
  require(data.trial_count() >= 1, "psth needs at least one trial");
  return data.spike_counts() / static_cast<double>(data.trial_count());
}

/// Entry (s, t) is the fraction of trials where a fires in bin s and b in bin t.
inline Eigen::MatrixXd jpsth(const SpikeTrainSet& a, const SpikeTrainSet& b) {
  require(a.trial_count() == b.trial_count() && a.bin_count() == b.bin_count(), "jpsth: shape mismatch");
  require(a.trial_count() >= 1, "jpsth needs at least one trial");
  const Eigen::MatrixXd am = a.trials.cast<double>();
  const Eigen::MatrixXd bm = b.trials.cast<double>();
  return am.transpose() * bm / static_cast<double>(a.trial_count());
}

// ---------------------------------------------------------------------------
// File formats

enum class EnsembleFormat { Json, Csv };

inline EnsembleFormat format_from_path(const std::filesystem::path& p) {
  if (std::filesystem::is_directory(p) || p.extension() == ".csv" || p.extension().empty()) return EnsembleFormat::Csv;
  return EnsembleFormat::Json;
}

namespace detail {

inline SpikeMatrix matrix_from_rows(const std::vector<std::vector<int>>& rows, const std::string& who) {
  if (rows.empty()) return SpikeMatrix(0, 0);
  const std::size_t width = rows.front().size();
  SpikeMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == width, who + ": trial " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                         " bins, expected " + std::to_string(width));
    for (std::size_t t = 0; t < width; ++t) {
      const int v = rows[r][t];
      require(v == 0 || v == 1, who + ": trial " + std::to_string(r) + " bin " + std::to_string(t) +
                                    " has value " + std::to_string(v) + " (must be 0 or 1)");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = static_cast<std::uint8_t>(v);
    }
  }
  return m;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  out << text;
}

} // namespace detail

inline nlohmann::json ensemble_to_json(const Ensemble& e) {
  nlohmann::json j;
  j["condition"] = e.condition_label;
  j["bin_width_s"] = e.neurons.empty() ? 1.0 : e.neurons.front().bin_width;
  j["t_grid"] = e.neurons.empty() ? std::vector<double>{}
                                  : std::vector<double>(e.neurons.front().t_grid.data(),
                                                        e.neurons.front().t_grid.data() + e.neurons.front().t_grid.size());
  j["neurons"] = nlohmann::json::array();
  for (const auto& n : e.neurons) {
    nlohmann::json trials = nlohmann::json::array();
    for (Eigen::Index r = 0; r < n.trial_count(); ++r) {
      std::vector<int> row(static_cast<std::size_t>(n.bin_count()));
      for (Eigen::Index t = 0; t < n.bin_count(); ++t) row[static_cast<std::size_t>(t)] = n.trials(r, t);
      trials.push_back(std::move(row));
    }
    j["neurons"].push_back({{"id", n.neuron_id}, {"trials", std::move(trials)}});
  }
  return j;
}

inline Ensemble ensemble_from_json(const nlohmann::json& j) {
  Ensemble e;
  try {
    require(j.is_object(), "ensemble JSON must be an object");
    require(j.contains("neurons") && j["neurons"].is_array(), "ensemble JSON: missing 'neurons' array");
    e.condition_label = j.value("condition", std::string{});
    const double bw = j.value("bin_width_s", 0.0);
    Eigen::VectorXd grid;
    if (j.contains("t_grid")) {
      const auto g = j["t_grid"].get<std::vector<double>>();
      grid = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    }
    for (const auto& nj : j["neurons"]) {
      const auto id = nj.at("id").get<std::string>();
      const auto rows = nj.at("trials").get<std::vector<std::vector<int>>>();
      SpikeTrainSet s = make_spike_train(id, detail::matrix_from_rows(rows, "neuron '" + id + "'"), bw);
      if (grid.size() > 0) s.t_grid = grid;
      e.neurons.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed ensemble JSON: ") + ex.what());
  }
  e.validate();
  return e;
}

/// Canonical JSON text: compact, fixed key order, trailing newline.
inline std::string ensemble_to_json_text(const Ensemble& e) { return ensemble_to_json(e).dump() + "\n"; }

inline SpikeTrainSet load_neuron_csv(const std::filesystem::path& p, std::string id, double bin_width = 0.0) {
  std::istringstream in(detail::read_file(p));
  std::vector<std::vector<int>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<int> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(cell, &used);
        require(used == cell.size(), "");
        row.push_back(v);
      } catch (const std::exception&) {
        throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return make_spike_train(std::move(id), detail::matrix_from_rows(rows, p.string()), bin_width);
}

inline std::string neuron_to_csv_text(const SpikeTrainSet& s) {
  std::string out;
  out.reserve(static_cast<std::size_t>(s.trial_count() * (2 * s.bin_count() + 1)));
  for (Eigen::Index r = 0; r < s.trial_count(); ++r) {
    for (Eigen::Index t = 0; t < s.bin_count(); ++t) {
      if (t) out.push_back(',');
      out.push_back(static_cast<char>('0' + s.trials(r, t)));
    }
    out.push_back('\n');
  }
  return out;
}

/// JSON: a single file. CSV: a directory holding one `<id>.csv` per neuron
/// (rows are trials); neurons load in file-name order and the bin width is
/// not stored, so `bin_width` (or 1/T) is used.
inline Ensemble load_ensemble(const std::filesystem::path& path, EnsembleFormat format, double bin_width = 0.0) {
  if (format == EnsembleFormat::Json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& ex) {
      throw ValidationError("'" + path.string() + "': " + ex.what());
    }
    return ensemble_from_json(j);
  }
  Ensemble e;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  require(!files.empty(), "no .csv files in '" + path.string() + "'");
  for (const auto& f : files) e.neurons.push_back(load_neuron_csv(f, f.stem().string(), bin_width));
  e.validate();
  return e;
}

/// Event-time JSON: {"trial_duration_s": D, "neurons": [{"id": "...", "trials": [[t, ...], ...]}]}.
/// Every neuron is discretized at `bin_width`.
inline Ensemble load_event_times(const std::filesystem::path& path, double bin_width, std::size_t* collapsed = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ValidationError("'" + path.string() + "': " + ex.what());
  }
  require(j.is_object() && j.contains("trial_duration_s") && j["trial_duration_s"].is_number(),
          "trial_duration_s: missing or not a number");
  require(j.contains("neurons") && j["neurons"].is_array() && !j["neurons"].empty(), "neurons: missing or empty");
  Ensemble e;
  if (j.contains("condition")) e.condition_label = j["condition"].get<std::string>();
  std::size_t merged = 0;
  for (std::size_t i = 0; i < j["neurons"].size(); ++i) {
    const auto& n = j["neurons"][i];
    const std::string where = "neurons[" + std::to_string(i) + "]";
    require(n.contains("id") && n["id"].is_string(), where + ".id: missing or not a string");
    require(n.contains("trials") && n["trials"].is_array(), where + ".trials: missing or not an array");
    EventTimesRecord rec;
    rec.trial_duration = j["trial_duration_s"].get<double>();
    try {
      rec.trials = n["trials"].get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(where + ".trials: expected arrays of spike times");
    }
    DiscretizeResult d = discretize(rec, bin_width, n["id"].get<std::string>());
    merged += d.collapsed_spikes;
    e.neurons.push_back(std::move(d.data));
  }
  if (collapsed) *collapsed = merged;
  e.validate();
  return e;
}

inline void save_ensemble(const Ensemble& e, const std::filesystem::path& path, EnsembleFormat format) {
  e.validate();
  if (format == EnsembleFormat::Json) {
    detail::write_file(path, ensemble_to_json_text(e));
    return;
  }
  std::filesystem::create_directories(path);
  for (const auto& n : e.neurons) detail::write_file(path / (n.neuron_id + ".csv"), neuron_to_csv_text(n));
}

inline std::string psth_csv(const SpikeTrainSet& s) {
  const Eigen::VectorXd p = psth(s);
  std::ostringstream out;
  out.precision(17);
  out << "bin,t,rate\n";
  for (Eigen::Index t = 0; t < p.size(); ++t) out << t << ',' << s.t_grid[t] << ',' << p[t] << '\n';
  return out.str();
}

/// Long-form JPSTH: one row per (s, t) cell.
inline std::string jpsth_csv(const SpikeTrainSet& a, const SpikeTrainSet& b) {
  const Eigen::MatrixXd j = jpsth(a, b);
  std::ostringstream out;
  out.precision(17);
  out << "bin_a,bin_b,joint_rate\n";
  for (Eigen::Index s = 0; s < j.rows(); ++s)
    for (Eigen::Index t = 0; t < j.cols(); ++t) out << s << ',' << t << ',' << j(s, t) << '\n';
  return out.str();
}

} // namespace spikesync
