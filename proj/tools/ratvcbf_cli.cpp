#include <ratvcbf/output.hpp>
#include <ratvcbf/selftest.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

ratvcbf::SimConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  auto tree = path.empty() ? boost::property_tree::ptree{} : ratvcbf::read_config_file(path);
  for (const auto& o : overrides) ratvcbf::apply_override(tree, o);
  return ratvcbf::load_config(tree);
}

void print_summary(const ratvcbf::RunSummary& s) {
  std::printf("%-13s act=%-7.3f min_h=%-11.4g min_robust=%-11.4g min_h_true=%-11.4g mean_h=%-9.4g "
              "viol=%zu/%zu edge_viol=%zu/%zu mrr_in=%.3f infeas=%zu smid=%zu/%zu %s\n",
              s.mode.c_str(), s.activation_time, s.min_h_r, s.min_robust_h, s.min_h_true, s.mean_h, s.violation_ticks,
              s.violation_ticks_true, s.edge_violation_ticks, s.edge_violation_ticks_true, s.mrr_in_band_fraction,
              s.infeasible_ticks, s.smid_inconsistency_count, s.smid_updates, s.pass ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust adaptive time-varying CBF safety filter simulator"};
  app.require_subcommand(1);

  std::string config, out = "out", mode = "ratvcbf";
  std::uint64_t seed = 1;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "simulate one filter mode");
  run->add_option("--config", config, "config file (INI sections)")->check(CLI::ExistingFile);
  auto* mode_opt = run->add_option("--mode", mode, "tvcbf | ratvcbf | ratvcbf-smid (default: filter.mode)");
  mode_opt->check(CLI::IsMember({"tvcbf", "ratvcbf", "ratvcbf-smid"}));
  run->add_option("--out", out, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "disturbance seed (default: sim.seed)");
  run->add_option("--set", overrides, "override, section.key=value");

  auto* cmp = app.add_subcommand("compare", "run all three modes on the same scenario");
  cmp->add_option("--config", config, "config file (INI sections)")->check(CLI::ExistingFile);
  cmp->add_option("--out", out, "output directory");
  cmp->add_option("--set", overrides, "override, section.key=value");

  auto* st = app.add_subcommand("selftest", "run the built-in property oracles");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load(config, overrides);
      if (*seed_opt) cfg.seed = seed;
      const auto m = *mode_opt ? ratvcbf::parse_mode(mode) : cfg.filter.mode;
      const auto res = ratvcbf::run(cfg, m, cfg.seed);
      ratvcbf::emit_outputs(res.log, res.summary, cfg, out);
      print_summary(res.summary);
      return res.summary.pass ? 0 : 3;
    }
    if (*cmp) {
      const auto cfg = load(config, overrides);
      const auto c = ratvcbf::compare(cfg);
      ratvcbf::emit_comparison(c, cfg, out);
      for (const auto& r : c.runs) print_summary(r.summary);
      std::printf("conservatism reduction %.2f%%  %s\n", c.conservatism_reduction_percent, c.pass ? "PASS" : "FAIL");
      return c.pass ? 0 : 3;
    }
    if (*st) return ratvcbf::selftest(std::cout) ? 0 : 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
