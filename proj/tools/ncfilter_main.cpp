// ncfilter command-line tool: thin wrapper over the C API.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "ncfilter.h"

namespace {

struct Common {
  std::string config;
  double dt = 0.0;
  double T = 0.0;
  std::string out;
  std::string format;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "config file or preset name")->required();
  cmd->add_option("--dt", c.dt, "time step (overrides config)");
  cmd->add_option("--T", c.T, "horizon (overrides config)");
  cmd->add_option("--out", c.out, "output directory (default ./out)");
  cmd->add_option("--format", c.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
}

int report(ncf_status st) {
  std::fprintf(stderr, "ncfilter: error: %s\n", ncf_last_error());
  return st == NCF_ERR_VERIFY_FAILED ? 1 : 2;
}

// Loads the config and applies command-line overrides.
ncf_status load(const Common& c, ncf_config** cfg) {
  ncf_status st = ncf_config_load(c.config.c_str(), cfg);
  if (st != NCF_OK) return st;
  if ((st = ncf_config_set_grid(*cfg, c.dt, c.T)) != NCF_OK) return st;
  return ncf_config_set_output(*cfg, c.out.empty() ? nullptr : c.out.c_str(),
                               c.format.empty() ? nullptr : c.format.c_str());
}

int finish_table(ncf_config* cfg, ncf_table* table) {
  for (size_t i = 0; i < ncf_table_warning_count(table); ++i)
    std::fprintf(stderr, "ncfilter: warning: %s\n", ncf_table_warning(table, i));
  char* path = nullptr;
  const ncf_status st = ncf_write_outputs(cfg, table, &path);
  ncf_table_free(table);
  if (st != NCF_OK) {
    ncf_config_free(cfg);
    return report(st);
  }
  std::printf("wrote %s\n", path);
  ncf_string_free(path);
  ncf_config_free(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filtering and master-equation simulations for open quantum "
               "systems driven by single-photon and coherent-state fields"};
  app.set_version_flag("--version", std::string(ncf_version()));
  app.require_subcommand(1);

  Common run_opts, traj_opts, verify_opts;
  long long M = 0;
  unsigned long long seed = 0;
  int threads = 0;
  int seeds = 3;

  auto* run = app.add_subcommand("run", "deterministic run (master equation and no-count probability)");
  add_common(run, run_opts);

  auto* traj = app.add_subcommand("trajectories", "ensemble of filtered trajectories");
  add_common(traj, traj_opts);
  traj->add_option("--M", M, "number of trajectories");
  auto* seed_opt = traj->add_option("--seed", seed, "master seed");
  traj->add_option("--threads", threads, "worker threads (0: NCFILTER_THREADS or all cores)");

  auto* verify = app.add_subcommand("verify", "compare reduced equations against the extended system");
  add_common(verify, verify_opts);
  verify->add_option("--seeds", seeds, "trajectories per same-record check")
      ->check(CLI::PositiveNumber);

  auto* presets = app.add_subcommand("presets", "list built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  if (presets->parsed()) {
    for (const char* p : {"fig1-ground", "fig1-excited", "fig2-ground", "fig2-excited"})
      std::printf("%s\n", p);
    return 0;
  }

  ncf_config* cfg = nullptr;
  if (run->parsed()) {
    if (ncf_status st = load(run_opts, &cfg); st != NCF_OK) return ncf_config_free(cfg), report(st);
    ncf_table* table = nullptr;
    if (ncf_status st = ncf_run(cfg, &table); st != NCF_OK) return ncf_config_free(cfg), report(st);
    return finish_table(cfg, table);
  }

  if (traj->parsed()) {
    if (ncf_status st = load(traj_opts, &cfg); st != NCF_OK) return ncf_config_free(cfg), report(st);
    if (ncf_status st = ncf_config_set_ensemble_size(cfg, M); st != NCF_OK)
      return ncf_config_free(cfg), report(st);
    if (seed_opt->count() > 0) ncf_config_set_seed(cfg, seed);
    ncf_table* table = nullptr;
    if (ncf_status st = ncf_trajectories(cfg, threads, &table); st != NCF_OK)
      return ncf_config_free(cfg), report(st);
    return finish_table(cfg, table);
  }

  if (ncf_status st = load(verify_opts, &cfg); st != NCF_OK) return ncf_config_free(cfg), report(st);
  ncf_report* rep = nullptr;
  if (ncf_status st = ncf_verify(cfg, seeds, &rep); st != NCF_OK)
    return ncf_config_free(cfg), report(st);
  std::fputs(ncf_report_text(rep), stdout);
  const int passed = ncf_report_passed(rep);
  ncf_report_free(rep);
  ncf_config_free(cfg);
  return passed ? 0 : 1;
}
