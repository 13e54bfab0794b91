#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "flowscope/pipeline.hpp"
#include "flowscope/synthetic.hpp"

using namespace flowscope;

namespace {

struct CommonOptions {
  std::string config;
  std::map<std::string, std::string> overrides;
};

/// --config plus one override flag per configuration field; --seed is an
/// alias of --base_seed.
void add_common(CLI::App* app, CommonOptions& opt) {
  app->add_option("--config", opt.config, "run configuration file (key = value)");
  for (const auto& f : config_fields()) {
    const std::string name = f.name;
    if (name == "base_seed") continue;
    app->add_option_function<std::string>(
        "--" + name, [&opt, name](const std::string& v) { opt.overrides[name] = v; }, "override '" + name + "'");
  }
  app->add_option_function<std::string>(
      "--seed,--base_seed", [&opt](const std::string& v) { opt.overrides["base_seed"] = v; }, "base random seed");
}

RunConfig resolve(const CommonOptions& opt) {
  RunConfig cfg = opt.config.empty() ? RunConfig{} : load_run_config(opt.config);
  for (const auto& [k, v] : opt.overrides) set_config_value(cfg, k, v);
  return cfg;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (auto part : detail::split(s, ',')) out.push_back(detail::config_unsigned("sizes", std::string(part)));
  return out;
}

int report(const std::exception& e) {
  std::cerr << "flowscope: " << e.what() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-based analysis of directed networks"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    CommonOptions opt;
    StageSelection sel;
  };
  std::map<std::string, Sub> subs;
  auto define = [&](const std::string& name, const std::string& help, StageSelection sel) -> Sub& {
    auto& s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.sel = sel;
    add_common(s.app, s.opt);
    return s;
  };
  StageSelection none{false, false, false, false, false, false, std::nullopt};

  define("ingest", "load an edge list and report its connected components", none);
  StageSelection sweep_only = none;
  sweep_only.sweep = true;
  define("sweep", "Markov Stability sweep over Markov time", sweep_only);
  StageSelection comm = sweep_only;
  comm.communities = true;
  define("communities", "sweep plus robust partitions", comm);
  StageSelection roles_only = none;
  roles_only.roles = true;
  define("roles", "flow roles from role-based similarity", roles_only);
  StageSelection bridge = none;
  bridge.bridgeness = true;
  bridge.communities = true;
  auto& bsub = define("bridgeness", "bridgeness of boundary edges between communities", bridge);
  std::optional<CommunityId> flow_from, flow_to;
  bsub.app->add_option("--from", flow_from, "community the information flows from");
  bsub.app->add_option("--to", flow_to, "community the information flows to");
  define("run", "the full pipeline", StageSelection{});

  auto* crosstab = app.add_subcommand("crosstab", "cross-tabulate two partition files");
  std::string part_a, part_b, crosstab_out = "flowscope_out";
  crosstab->add_option("--partition", part_a, "partition whose communities form the columns")->required();
  crosstab->add_option("--secondary_partition", part_b, "partition whose communities form the rows")->required();
  crosstab->add_option("--output", crosstab_out, "output directory");

  auto* synth = app.add_subcommand("synth", "generate a planted benchmark graph");
  std::string model = "sbm", sizes = "50,50,50,50", synth_out = "flowscope_out";
  double p_in = 0.2, p_out = 0.01, p_forward = 0.5;
  std::uint64_t synth_seed = kDefaultSeed;
  synth->add_option("--model", model, "sbm or layered")->check(CLI::IsMember({"sbm", "layered"}));
  synth->add_option("--sizes", sizes, "comma-separated block or layer sizes");
  synth->add_option("--p_in", p_in, "within-block edge probability");
  synth->add_option("--p_out", p_out, "between-block edge probability");
  synth->add_option("--p_forward", p_forward, "layer-to-next-layer edge probability");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--output", synth_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (crosstab->parsed()) {
      const auto a = load_partition(part_a);
      const auto b = load_partition(part_b);
      const auto ct = cross_tabulate(Partition::from_labels(b.communities), Partition::from_labels(a.communities),
                                     b.labels, a.labels);
      std::filesystem::create_directories(crosstab_out);
      std::ofstream out(std::filesystem::path(crosstab_out) / "crosstab.csv");
      write_crosstab(out, ct);
      return 0;
    }
    if (synth->parsed()) {
      const auto s = parse_sizes(sizes);
      const PlantedGraph pg = model == "sbm" ? directed_sbm(s, p_in, p_out, synth_seed)
                                             : layered_flow_graph(s, p_forward, synth_seed);
      std::filesystem::create_directories(synth_out);
      std::ofstream edges(std::filesystem::path(synth_out) / "edges.csv");
      write_edge_list(edges, pg.graph, false);
      std::ofstream planted(std::filesystem::path(synth_out) / "planted.csv");
      write_partition(planted, pg.graph, pg.planted);
      return 0;
    }
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      RunConfig cfg;
      try {
        cfg = resolve(s.opt);
        validate(cfg);
      } catch (const std::exception& e) {
        std::cerr << "flowscope: invalid configuration: " << e.what() << '\n';
        return 2;
      }
      if (name == "bridgeness" && (flow_from.has_value() != flow_to.has_value())) {
        std::cerr << "flowscope: --from and --to must be given together\n";
        return 2;
      }
      if (flow_from) s.sel.bridgeness_pair = std::make_pair(*flow_from, *flow_to);
      if (name == "roles") cfg.roles = true;
      run_pipeline(cfg, s.sel);
      return 0;
    }
  } catch (const std::exception& e) {
    return report(e);
  }
  return 0;
}
