#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddkf/config.hpp"
#include "ddkf/experiment.hpp"
#include "ddkf/metrics.hpp"
#include "ddkf/topology.hpp"

namespace ddkf {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to exactly `v`.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct MetricsRecord {
  std::size_t iteration = 0;
  std::size_t cluster_id = 0;
  std::string policy;
  double msd_linear = 0.0;
  double msd_db = 0.0;
  std::size_t n_trials = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr std::string_view kMsdHeader = "iteration,cluster_id,policy,msd_linear,msd_db,n_trials";

[[nodiscard]] inline std::vector<MetricsRecord> make_records(const ExperimentResult& r) {
  std::vector<MetricsRecord> out;
  const std::string name(policy_name(r.policy));
  const std::size_t iters = r.msd.empty() ? 0 : r.msd.front().linear.size();
  for (std::size_t j = 0; j < iters; ++j)
    for (std::size_t l = 0; l < r.msd.size(); ++l) {
      const double lin = r.msd[l].linear[j];
      out.push_back({j, l, name, lin, to_db(lin), r.msd[l].n_trials});
    }
  return out;
}

inline void write_msd_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << kMsdHeader << '\n';
  for (const auto& r : records) {
    os << r.iteration << ',' << r.cluster_id << ',' << r.policy << ',' << format_double(r.msd_linear)
       << ',' << format_double(r.msd_db) << ',' << r.n_trials << '\n';
  }
}

[[nodiscard]] inline std::vector<MetricsRecord> parse_msd_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMsdHeader) throw IoError("msd csv: missing or bad header");
  std::vector<MetricsRecord> out;
  auto num = [](const std::string& s, auto& v) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw IoError("msd csv: bad field '" + s + "'");
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 6) throw IoError("msd csv: expected 6 fields in '" + line + "'");
    MetricsRecord r;
    num(f[0], r.iteration);
    num(f[1], r.cluster_id);
    r.policy = f[2];
    num(f[3], r.msd_linear);
    num(f[4], r.msd_db);
    num(f[5], r.n_trials);
    out.push_back(std::move(r));
  }
  return out;
}

/// node_id,x,y,cluster with 1-based node ids.
inline void write_nodes_csv(std::ostream& os, const Network& net, const ClusterAssignment& ca) {
  os << "node_id,x,y,cluster\n";
  for (std::size_t m = 0; m < net.size(); ++m) {
    os << m + 1 << ',' << format_double(net.positions()[m].x) << ','
       << format_double(net.positions()[m].y) << ',' << ca.cluster_of[m] << '\n';
  }
}

/// node_a,node_b,alive for every edge of `original`; alive = 1 when the edge
/// survives in `current`.
inline void write_edges_csv(std::ostream& os, const Network& original, const Network& current) {
  os << "node_a,node_b,alive\n";
  for (std::size_t a = 0; a < original.size(); ++a)
    for (std::size_t b = a + 1; b < original.size(); ++b)
      if (original.adjacent(a, b)) {
        os << a + 1 << ',' << b + 1 << ',' << (current.adjacent(a, b) ? 1 : 0) << '\n';
      }
}

/// iteration,n,m,weight for every supported entry c_nm (1-based node ids).
inline void write_weights_csv(std::ostream& os, const std::vector<WeightSnapshot>& snaps) {
  os << "iteration,n,m,weight\n";
  for (const auto& s : snaps)
    for (std::size_t m = 0; m < s.C.cols(); ++m)
      for (std::size_t n = 0; n < s.C.rows(); ++n)
        if (s.C(n, m) != 0.0) {
          os << s.iteration << ',' << n + 1 << ',' << m + 1 << ',' << format_double(s.C(n, m)) << '\n';
        }
}

/// Trial-averaged truth and cluster-mean estimates (positions only).
inline void write_trajectory_csv(std::ostream& os, const std::vector<ExperimentResult>& results) {
  os << "iteration,target_id,policy,x,y,x_hat,y_hat\n";
  for (const auto& r : results) {
    const std::string name(policy_name(r.policy));
    for (std::size_t j = 0; j < r.truth.size(); ++j)
      for (std::size_t t = 0; t < r.truth[j].size(); ++t) {
        os << j << ',' << t + 1 << ',' << name << ',' << format_double(r.truth[j][t][0]) << ','
           << format_double(r.truth[j][t][1]) << ',' << format_double(r.cluster_estimate[j][t][0])
           << ',' << format_double(r.cluster_estimate[j][t][1]) << '\n';
      }
  }
}

inline constexpr std::string_view kMsdNormalization =
    "per-cluster MSD = mean over the cluster's nodes of |x_target - x_hat_node|^2 (full 4-state), "
    "then mean over trials; cluster_id 0 is the mean over all nodes";

[[nodiscard]] inline nlohmann::json run_meta(const ExperimentConfig& cfg,
                                             const std::vector<Policy>& policies) {
  nlohmann::json j;
  j["artifact"] = "ddkf";
  j["artifact_version"] = std::string(kVersion);
  j["seed"] = cfg.seed;
  std::vector<std::string> names;
  for (Policy p : policies) names.emplace_back(policy_name(p));
  j["policies"] = names;
  j["msd_normalization"] = std::string(kMsdNormalization);
  j["config"] = config_to_json(cfg);
  return j;
}

[[nodiscard]] inline nlohmann::json summarize(const std::vector<ExperimentResult>& results,
                                             double band_db = 3.0) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : results) {
    nlohmann::json p;
    nlohmann::json clusters = nlohmann::json::array();
    for (std::size_t l = 0; l < r.msd.size(); ++l) {
      const auto db = r.msd[l].db();
      nlohmann::json c;
      c["cluster_id"] = l;
      c["steady_state_db"] = steady_state_level(db);
      if (db.size() >= 10) {
        const auto conv = convergence_iteration(db, band_db);
        c["convergence_iteration"] = conv ? nlohmann::json(*conv) : nlohmann::json(nullptr);
      }
      clusters.push_back(c);
    }
    p["clusters"] = clusters;
    double sum = 0.0;
    std::size_t perfect = 0;
    for (double s : r.recovery) {
      sum += s;
      perfect += s == 1.0 ? 1 : 0;
    }
    p["recovery_mean"] = sum / static_cast<double>(r.recovery.size());
    p["recovery_perfect"] = perfect;
    p["n_trials"] = r.n_trials;
    out[std::string(policy_name(r.policy))] = p;
  }
  return out;
}

namespace detail {

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  writer(os);
  os.flush();
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace detail

/// Writes msd.csv, trajectory.csv, topology/edge exports, optional weight
/// snapshots, run_meta.json and summary.json into `out_dir`.
inline void write_outputs(const std::filesystem::path& out_dir, const ExperimentConfig& cfg,
                          const std::vector<ExperimentResult>& results) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<MetricsRecord> records;
  std::vector<Policy> policies;
  for (const auto& r : results) {
    auto rec = make_records(r);
    records.insert(records.end(), rec.begin(), rec.end());
    policies.push_back(r.policy);
  }
  detail::write_file(out_dir / "msd.csv", [&](std::ostream& os) { write_msd_csv(os, records); });
  detail::write_file(out_dir / "trajectory.csv",
                     [&](std::ostream& os) { write_trajectory_csv(os, results); });

  if (!results.empty()) {
    const TrialResult& first = results.front().first_trial;
    detail::write_file(out_dir / "topology_initial.csv", [&](std::ostream& os) {
      write_nodes_csv(os, first.initial_network, first.tasks);
    });
    detail::write_file(out_dir / "edges_initial.csv", [&](std::ostream& os) {
      write_edges_csv(os, first.initial_network, first.initial_network);
    });
  }
  const bool suffix = results.size() > 1;
  for (const auto& r : results) {
    const std::string tag = suffix ? "_" + std::string(policy_name(r.policy)) : "";
    const TrialResult& t = r.first_trial;
    detail::write_file(out_dir / ("topology_final" + tag + ".csv"), [&](std::ostream& os) {
      write_nodes_csv(os, t.final_network, t.inferred);
    });
    detail::write_file(out_dir / ("edges_final" + tag + ".csv"), [&](std::ostream& os) {
      write_edges_csv(os, t.initial_network, t.final_network);
    });
    if (!t.weights.empty()) {
      detail::write_file(out_dir / ("weights_" + std::string(policy_name(r.policy)) + ".csv"),
                         [&](std::ostream& os) { write_weights_csv(os, t.weights); });
    }
  }
  detail::write_file(out_dir / "run_meta.json",
                     [&](std::ostream& os) { os << run_meta(cfg, policies).dump(2) << '\n'; });
  detail::write_file(out_dir / "summary.json",
                     [&](std::ostream& os) { os << summarize(results).dump(2) << '\n'; });
}

}  // namespace ddkf
