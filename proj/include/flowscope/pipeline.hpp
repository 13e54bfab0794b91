#pragma once

// End-to-end batch run: ingestion, stability sweep, robust communities,
// flow roles, bridgeness, cross-tabulation and audience overlap.
//
// Every stage writes its files as `<name>.partial` and renames them only
// once the stage has finished, so a failing stage never touches outputs of
// stages that completed before it. Analytic outputs depend on the inputs and
// the configuration only; wall times and timestamps live in the manifest.

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowscope/analysis.hpp"
#include "flowscope/error.hpp"
#include "flowscope/graph.hpp"
#include "flowscope/markov.hpp"
#include "flowscope/parallel.hpp"
#include "flowscope/partition.hpp"
#include "flowscope/roles.hpp"
#include "flowscope/stability.hpp"

namespace flowscope {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 20140101;

struct RunConfig {
  std::string edges;
  bool directed = true;
  bool weighted = false;
  bool largest_component = true;
  /// Precomputed community partition; skips the stability stage.
  std::string partition;
  /// Second network (or its partition) cross-tabulated against the communities.
  std::string secondary_edges;
  std::string secondary_partition;
  std::string followers;

  double teleport_alpha = 0.85;
  TimeMode mode = TimeMode::continuous;
  double time_min = 1e-2;
  double time_max = 1e2;
  std::size_t time_count = 60;
  std::size_t n_runs = 100;
  std::uint64_t base_seed = kDefaultSeed;
  double vi_threshold = 0.05;

  bool roles = true;
  double rbs_alpha = 0.9;
  std::size_t k_max = 0;  // 0 = automatic
  double gamma = 0.5;
  std::size_t k_neighbor = 1;

  std::size_t bridgeness_top = 3;
  std::string output = "flowscope_out";
  unsigned workers = 0;  // 0 = all execution units
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(trim(v), out)) throw ParameterError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::uint64_t config_unsigned(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParameterError("'" + key + "' expects a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool config_bool(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParameterError("'" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

struct ConfigField {
  const char* name;
  bool is_path;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  using detail::config_bool;
  using detail::config_double;
  using detail::config_unsigned;
#define FLOWSCOPE_FIELD(name, path, parse, out)                                           \
  ConfigField{#name, path, [](RunConfig& c, const std::string& v) { c.name = parse; }, \
              [](const RunConfig& c) { return nlohmann::json(out); }}
  static const std::vector<ConfigField> fields = {
      FLOWSCOPE_FIELD(edges, true, v, c.edges),
      FLOWSCOPE_FIELD(directed, false, config_bool("directed", v), c.directed),
      FLOWSCOPE_FIELD(weighted, false, config_bool("weighted", v), c.weighted),
      FLOWSCOPE_FIELD(largest_component, false, config_bool("largest_component", v), c.largest_component),
      FLOWSCOPE_FIELD(partition, true, v, c.partition),
      FLOWSCOPE_FIELD(secondary_edges, true, v, c.secondary_edges),
      FLOWSCOPE_FIELD(secondary_partition, true, v, c.secondary_partition),
      FLOWSCOPE_FIELD(followers, true, v, c.followers),
      FLOWSCOPE_FIELD(teleport_alpha, false, config_double("teleport_alpha", v), c.teleport_alpha),
      FLOWSCOPE_FIELD(mode, false, parse_time_mode(std::string(detail::trim(v))), to_string(c.mode)),
      FLOWSCOPE_FIELD(time_min, false, config_double("time_min", v), c.time_min),
      FLOWSCOPE_FIELD(time_max, false, config_double("time_max", v), c.time_max),
      FLOWSCOPE_FIELD(time_count, false, config_unsigned("time_count", v), c.time_count),
      FLOWSCOPE_FIELD(n_runs, false, config_unsigned("n_runs", v), c.n_runs),
      FLOWSCOPE_FIELD(base_seed, false, config_unsigned("base_seed", v), c.base_seed),
      FLOWSCOPE_FIELD(vi_threshold, false, config_double("vi_threshold", v), c.vi_threshold),
      FLOWSCOPE_FIELD(roles, false, config_bool("roles", v), c.roles),
      FLOWSCOPE_FIELD(rbs_alpha, false, config_double("rbs_alpha", v), c.rbs_alpha),
      FLOWSCOPE_FIELD(k_max, false, config_unsigned("k_max", v), c.k_max),
      FLOWSCOPE_FIELD(gamma, false, config_double("gamma", v), c.gamma),
      FLOWSCOPE_FIELD(k_neighbor, false, config_unsigned("k_neighbor", v), c.k_neighbor),
      FLOWSCOPE_FIELD(bridgeness_top, false, config_unsigned("bridgeness_top", v), c.bridgeness_top),
      FLOWSCOPE_FIELD(output, true, v, c.output),
      FLOWSCOPE_FIELD(workers, false, static_cast<unsigned>(config_unsigned("workers", v)), c.workers),
  };
#undef FLOWSCOPE_FIELD
  return fields;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields())
    if (key == f.name) {
      f.set(cfg, value);
      return;
    }
  throw ParameterError("unknown configuration key '" + key + "'");
}

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
/// Relative paths resolve against base_dir.
inline RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const std::string key(detail::trim(view.substr(0, eq)));
    std::string value(detail::trim(view.substr(eq + 1)));
    if (!seen.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    try {
      for (const auto& f : config_fields())
        if (key == f.name && f.is_path && !value.empty() && !base_dir.empty() &&
            std::filesystem::path(value).is_relative())
          value = (base_dir / value).lexically_normal().string();
      set_config_value(cfg, key, value);
    } catch (const ParameterError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open configuration file '" + path + "'");
  return parse_run_config(in, std::filesystem::path(path).parent_path());
}

/// Range checks and input readability, before anything is computed.
inline void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
  };
  need(!c.edges.empty(), "edges: an input edge list is required");
  need(c.teleport_alpha > 0.0 && c.teleport_alpha < 1.0, "teleport_alpha must lie in (0,1)");
  need(c.time_min > 0.0 && std::isfinite(c.time_max) && c.time_max >= c.time_min,
       "need 0 < time_min <= time_max < inf");
  need(c.time_count >= 1, "time_count must be >= 1");
  need(c.n_runs >= 1, "n_runs must be >= 1");
  need(c.vi_threshold >= 0.0 && c.vi_threshold <= 1.0, "vi_threshold must lie in [0,1]");
  need(c.rbs_alpha > 0.0 && c.rbs_alpha < 1.0, "rbs_alpha must lie in (0,1)");
  need(c.gamma > 0.0, "gamma must be positive");
  need(c.k_neighbor >= 1, "k_neighbor must be >= 1");
  need(!c.output.empty(), "output directory must be set");
  need(c.secondary_edges.empty() || c.secondary_partition.empty(),
       "give either secondary_edges or secondary_partition, not both");
  for (const std::string* p : {&c.edges, &c.partition, &c.secondary_edges, &c.secondary_partition, &c.followers}) {
    if (p->empty()) continue;
    std::ifstream probe(*p);
    need(static_cast<bool>(probe), "cannot read input file '" + *p + "'");
  }
}

/// Log-spaced grid; in discrete mode rounded to distinct integers >= 1.
inline std::vector<double> sweep_times(const RunConfig& c) {
  auto t = log_times(c.time_min, c.time_max, c.time_count);
  if (c.mode == TimeMode::continuous) return t;
  std::vector<double> out;
  for (double x : t) {
    const double r = std::max(1.0, std::round(x));
    if (out.empty() || r > out.back()) out.push_back(r);
  }
  return out;
}

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Files of one stage, written as `.partial` until commit().
class StageFiles {
 public:
  explicit StageFiles(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ofstream& open(const std::string& name) {
    const auto partial = dir_ / (name + ".partial");
    streams_.push_back(std::make_unique<std::ofstream>(partial, std::ios::binary | std::ios::trunc));
    if (!*streams_.back()) throw Error("cannot write '" + partial.string() + "'");
    streams_.back()->precision(17);
    names_.push_back(name);
    return *streams_.back();
  }

  std::vector<std::string> commit() {
    for (auto& s : streams_) {
      s->close();
      if (!*s) throw Error("write failure in " + dir_.string());
    }
    for (const auto& name : names_) std::filesystem::rename(dir_ / (name + ".partial"), dir_ / name);
    auto done = std::move(names_);
    names_.clear();
    streams_.clear();
    return done;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::unique_ptr<std::ofstream>> streams_;
  std::vector<std::string> names_;
};

/// Which stages run; ingestion always does.
struct StageSelection {
  bool sweep = true;
  bool communities = true;
  bool roles = true;
  bool bridgeness = true;
  bool crosstab = true;
  bool audience = true;
  /// Restricts bridgeness to one ordered pair (flow_from, flow_to).
  std::optional<std::pair<CommunityId, CommunityId>> bridgeness_pair;
};

struct StabilityOutcome {
  std::vector<SweepRecord> sweep;
  std::vector<RobustWindow> windows;
  Partition communities;
  std::optional<std::size_t> chosen_window;
};

struct PipelineResult {
  DirectedGraph graph;
  std::optional<StabilityOutcome> stability;
  std::optional<Partition> communities;
  std::optional<RoleReport> roles;
  nlohmann::json manifest;
  std::vector<std::string> outputs;
};

namespace detail {

inline void write_sweep(std::ostream& out, const std::vector<SweepRecord>& sweep) {
  out << "markov_time,n_communities,best_value,mean_pairwise_vi\n";
  for (const auto& r : sweep)
    out << r.markov_time << ',' << r.n_communities << ',' << r.best_value << ',' << r.mean_pairwise_vi << '\n';
}

inline void write_windows(std::ostream& out, const std::vector<RobustWindow>& windows) {
  out << "window,t_start,t_end,first_index,last_index,n_communities,persistence,mean_pairwise_vi\n";
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    out << k << ',' << w.t_start << ',' << w.t_end << ',' << w.first_index << ',' << w.last_index << ','
        << w.partition.num_communities() << ',' << w.persistence << ',' << w.mean_vi_in_window << '\n';
  }
}

inline bool nontrivial(const Partition& p) { return p.num_communities() > 1 && p.num_communities() < p.size(); }

/// The most persistent window with a nontrivial partition; else the
/// nontrivial sweep point of lowest ensemble VI (earliest on ties); else the
/// most persistent window; else the first sweep point.
inline StabilityOutcome run_stability(const DirectedGraph& g, const RunConfig& c, unsigned workers) {
  const TransitionSystem ts = build_transition(g, c.teleport_alpha);
  const StationaryDistribution pi = stationary_distribution(ts);
  SweepOptions opt;
  opt.workers = workers;
  StabilityOutcome s;
  s.sweep = stability_sweep(ts, pi, sweep_times(c), c.n_runs, c.mode, c.base_seed, opt);
  s.windows = select_robust_partitions(s.sweep, c.vi_threshold);
  for (std::size_t k = 0; k < s.windows.size() && !s.chosen_window; ++k)
    if (nontrivial(s.windows[k].partition)) s.chosen_window = k;
  if (s.chosen_window) {
    s.communities = s.windows[*s.chosen_window].partition;
    return s;
  }
  const SweepRecord* pick = nullptr;
  for (const auto& r : s.sweep)
    if (nontrivial(r.best_partition) && (!pick || r.mean_pairwise_vi < pick->mean_pairwise_vi)) pick = &r;
  if (pick) {
    s.communities = pick->best_partition;
  } else if (!s.windows.empty()) {
    s.chosen_window = 0;
    s.communities = s.windows.front().partition;
  } else {
    s.communities = s.sweep.front().best_partition;
  }
  return s;
}

/// The `top` largest communities (ties: smaller id).
inline std::vector<CommunityId> largest_communities(const Partition& p, std::size_t top) {
  const auto sizes = p.community_sizes();
  std::vector<CommunityId> ids(sizes.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<CommunityId>(k);
  std::stable_sort(ids.begin(), ids.end(), [&](CommunityId a, CommunityId b) { return sizes[a] > sizes[b]; });
  ids.resize(std::min(top, ids.size()));
  return ids;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace detail

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_fields()) j[f.name] = f.get(c);
  return j;
}

/// Runs the selected stages and writes their reports into cfg.output.
/// Throws ParameterError on invalid configuration before any work, and
/// StageError naming the stage when a stage fails.
inline PipelineResult run_pipeline(const RunConfig& cfg, const StageSelection& sel = {}) {
  validate(cfg);
  const unsigned workers = cfg.workers > 0 ? cfg.workers : default_workers();
  const std::filesystem::path dir(cfg.output);
  std::filesystem::create_directories(dir);

  PipelineResult res;
  nlohmann::json& m = res.manifest;
  m["tool"] = "flowscope";
  m["version"] = kVersion;
  m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m["parameters"] = config_json(cfg);
  m["workers"] = workers;
  m["seeds"] = {{"base_seed", cfg.base_seed},
                {"louvain_seed_first", cfg.base_seed},
                {"louvain_seed_last", cfg.base_seed + cfg.n_runs - 1}};
  m["started_at"] = detail::utc_timestamp();
  m["stages"] = nlohmann::json::array();

  auto write_manifest = [&](bool complete) {
    const auto name = complete ? dir / "manifest.json" : dir / "manifest.json.partial";
    std::ofstream out(name, std::ios::binary | std::ios::trunc);
    out << m.dump(2) << '\n';
  };

  auto stage = [&](const std::string& name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    StageFiles files(dir);
    try {
      body(files);
      auto written = files.commit();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      m["stages"].push_back({{"name", name}, {"status", "ok"}, {"wall_seconds", secs}, {"outputs", written}});
      res.outputs.insert(res.outputs.end(), written.begin(), written.end());
    } catch (const std::exception& e) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      m["stages"].push_back({{"name", name}, {"status", "failed"}, {"wall_seconds", secs}, {"error", e.what()}});
      m["finished_at"] = detail::utc_timestamp();
      write_manifest(false);
      throw StageError(name, e.what());
    }
  };

  stage("ingest", [&](StageFiles& f) {
    const DirectedGraph full = load_edge_list(cfg.edges, cfg.directed, cfg.weighted);
    const auto comps = weakly_connected_components(full);
    std::vector<std::size_t> comp_of(full.num_nodes());
    std::vector<std::size_t> comp_edges(comps.size(), 0);
    for (std::size_t k = 0; k < comps.size(); ++k)
      for (NodeId v : comps[k]) comp_of[v] = k;
    for (const auto& e : full.edges()) ++comp_edges[comp_of[e.source]];
    auto& rep = f.open("components.csv");
    rep << "component,n_nodes,n_edges\n";
    for (std::size_t k = 0; k < comps.size(); ++k) rep << k << ',' << comps[k].size() << ',' << comp_edges[k] << '\n';
    auto& mem = f.open("component_membership.csv");
    mem << "label,component\n";
    for (NodeId v = 0; v < full.num_nodes(); ++v) mem << full.label(v) << ',' << comp_of[v] << '\n';
    res.graph = cfg.largest_component ? largest_weak_component(full) : full;
    m["graph"] = {{"input_nodes", full.num_nodes()},
                  {"input_edges", full.num_edges()},
                  {"components", comps.size()},
                  {"analysed_nodes", res.graph.num_nodes()},
                  {"analysed_edges", res.graph.num_edges()}};
  });
  const DirectedGraph& g = res.graph;

  if (!cfg.partition.empty()) {
    stage("partition", [&](StageFiles&) { res.communities = align_partition(g, load_partition(cfg.partition)); });
  } else if (sel.sweep || sel.communities || (sel.bridgeness && cfg.bridgeness_top > 1)) {
    stage("stability", [&](StageFiles& f) {
      res.stability = detail::run_stability(g, cfg, workers);
      detail::write_sweep(f.open("sweep.csv"), res.stability->sweep);
      if (!sel.communities) return;
      const auto& s = *res.stability;
      detail::write_windows(f.open("windows.csv"), s.windows);
      for (std::size_t k = 0; k < s.windows.size(); ++k)
        write_partition(f.open("window_" + std::to_string(k) + "_partition.csv"), g, s.windows[k].partition);
      write_partition(f.open("communities.csv"), g, s.communities);
      res.communities = s.communities;
      m["communities"] = {{"n_communities", s.communities.num_communities()},
                          {"window", s.chosen_window ? nlohmann::json(*s.chosen_window) : nlohmann::json()}};
    });
  }

  if (sel.roles && cfg.roles) {
    stage("roles", [&](StageFiles& f) {
      ProfileOptions popt;
      popt.k_max = cfg.k_max;
      const ProfileMatrix pm = profile_matrix(g, cfg.rbs_alpha, popt);
      const RmstGraph r = rmst(rbs_similarity(pm), cfg.gamma, cfg.k_neighbor);
      RoleSweepParameters params;
      params.times = sweep_times(cfg);
      params.n_runs = cfg.n_runs;
      params.base_seed = cfg.base_seed;
      params.vi_threshold = cfg.vi_threshold;
      params.mode = cfg.mode;
      params.workers = workers;
      res.roles = extract_roles(g, r, params);
      const auto& rep = *res.roles;
      auto& out = f.open("roles.csv");
      out << "label,role_index\n";
      for (NodeId v = 0; v < g.num_nodes(); ++v) out << g.label(v) << ',' << rep.roles[v] << '\n';
      std::vector<FriendProportions> friends;
      if (res.communities) friends = external_friend_proportion(g, *res.communities, rep.roles);
      auto& sum = f.open("roles_summary.txt");
      sum << "n_roles=" << rep.roles.num_communities() << '\n';
      sum << "lambda1=" << pm.lambda1 << '\n';
      sum << "lambda1_fallback=" << (pm.lambda_fallback ? "true" : "false") << '\n';
      sum << "k_max=" << pm.k_max << '\n';
      sum << "rmst_edges=" << r.edges.size() << '\n';
      if (rep.window) sum << "window_t_start=" << rep.window->t_start << "\nwindow_t_end=" << rep.window->t_end << '\n';
      for (std::size_t k = 0; k < rep.stats.size(); ++k) {
        const std::string p = "role." + std::to_string(k) + ".";
        sum << p << "members=" << rep.stats[k].members << '\n';
        sum << p << "mean_in_degree=" << rep.stats[k].mean_in_degree << '\n';
        sum << p << "mean_out_degree=" << rep.stats[k].mean_out_degree << '\n';
        if (!friends.empty()) {
          sum << p << "mean_external_friend_proportion=" << friends[k].mean << '\n';
          sum << p << "without_friends=" << friends[k].without_friends << '\n';
        }
      }
      m["roles"] = {{"n_roles", rep.roles.num_communities()}};
    });
  }

  if (sel.bridgeness && res.communities) {
    stage("bridgeness", [&](StageFiles& f) {
      std::vector<std::pair<CommunityId, CommunityId>> pairs;
      if (sel.bridgeness_pair) {
        pairs.push_back(*sel.bridgeness_pair);
      } else {
        const auto top = detail::largest_communities(*res.communities, cfg.bridgeness_top);
        for (CommunityId a : top)
          for (CommunityId b : top)
            if (a != b) pairs.emplace_back(a, b);
      }
      auto& sum = f.open("bridgeness_summary.csv");
      sum << "flow_from,flow_to,boundary_edges,reachable_pairs,unreachable_pairs,crossing_mass\n";
      for (auto [a, b] : pairs) {
        const auto r = edge_bridgeness(g, *res.communities, a, b, workers);
        write_bridgeness(f.open("bridgeness_" + std::to_string(a) + "_to_" + std::to_string(b) + ".csv"), g, r);
        sum << a << ',' << b << ',' << r.boundary.size() << ',' << r.reachable_pairs << ',' << r.unreachable_pairs << ','
            << r.crossing_mass << '\n';
      }
    });
  }

  if (sel.crosstab && res.communities && (!cfg.secondary_edges.empty() || !cfg.secondary_partition.empty())) {
    stage("crosstab", [&](StageFiles& f) {
      LabeledPartition secondary;
      if (!cfg.secondary_partition.empty()) {
        secondary = load_partition(cfg.secondary_partition);
      } else {
        DirectedGraph h = load_edge_list(cfg.secondary_edges, cfg.directed, cfg.weighted);
        if (cfg.largest_component) h = largest_weak_component(h);
        const auto s = detail::run_stability(h, cfg, workers);
        detail::write_sweep(f.open("secondary_sweep.csv"), s.sweep);
        write_partition(f.open("secondary_communities.csv"), h, s.communities);
        secondary.labels = h.labels();
        secondary.communities = s.communities.assignment();
      }
      // rows: secondary communities; columns: communities of the main graph
      const auto ct =
          cross_tabulate(Partition::from_labels(secondary.communities), *res.communities, secondary.labels, g.labels());
      write_crosstab(f.open("crosstab.csv"), ct);
    });
  }

  if (sel.audience && !cfg.followers.empty()) {
    stage("audience", [&](StageFiles& f) {
      std::ifstream in(cfg.followers);
      const auto sets = parse_follower_sets(in);
      write_audience_overlap(f.open("audience_overlap.csv"), audience_overlap(sets));
    });
  }

  m["finished_at"] = detail::utc_timestamp();
  write_manifest(true);
  std::filesystem::remove(dir / "manifest.json.partial");
  res.outputs.push_back("manifest.json");
  return res;
}

}  // namespace flowscope
