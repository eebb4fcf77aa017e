#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lof/config.hpp"
#include "lof/metrics.hpp"
#include "lof/sim_env.hpp"
#include "lof/svg.hpp"
#include "lof/training.hpp"
#include "lof/weight_gen.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

std::string key_listing() {
  std::string out = "Config keys (key = value per line) and defaults:\n";
  for (const auto& k : lof::RunConfig::key_infos()) {
    out += "  " + k.name + " = " + k.def + "  (" + k.help + ")\n";
  }
  out += "Environment: LOF_SEED overrides the config seed.\n";
  return out;
}

lof::RunConfig load_config(const std::string& path,
                           const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed_flag) {
  lof::RunConfig cfg =
      path.empty() ? lof::RunConfig() : lof::RunConfig::from_file(path);
  if (const char* env = std::getenv("LOF_SEED")) {
    cfg.set("seed", env);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw lof::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_flag) cfg.set("seed", std::to_string(*seed_flag));
  return cfg;
}

std::string expand_sweep_key(const std::string& key) {
  if (key == "beta") return "ss.beta_deg";
  if (key == "alpha") return "ss.alpha_deg";
  if (key == "rho") return "ss.rho";
  return key;
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value)");
  cmd->add_option("--set", opts.overrides, "override a config key (key=value)")
      ->take_all();
  std::uint64_t* slot = nullptr;
  (void)slot;
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opts](std::uint64_t v) { opts.seed = v; },
      "override the config seed");
}

int run_generate(const CommonOpts& common, const std::string& out, int n) {
  const lof::RunConfig cfg =
      load_config(common.config_path, common.overrides, common.seed);
  const lof::WorldConfig world = cfg.world();
  const int count = n > 0 ? n : cfg.get_int("train.dataset_size");
  lof::generate_dataset(world, count, out, cfg.hash());
  std::cout << "wrote " << count << " trajectories to " << out << "\n";
  return 0;
}

int run_train(const CommonOpts& common, const std::string& data,
              const std::string& out_checkpoint, const std::string& out_log,
              int iterations) {
  lof::RunConfig cfg =
      load_config(common.config_path, common.overrides, common.seed);
  if (iterations > 0) cfg.set("train.iterations", std::to_string(iterations));
  const lof::Dataset ds = lof::read_dataset(data);
  const lof::TrainConfig tc = cfg.train();
  const lof::TrainResult res = lof::train(ds, tc);
  lof::save_checkpoint(out_checkpoint, res.params, cfg.hash());
  if (!out_log.empty()) lof::write_train_log(out_log, res.log, cfg.hash());
  std::cout << "trained " << res.log.size() << " iterations, final loss "
            << (res.log.empty() ? 0.0 : res.log.back().loss) << "\n";
  return 0;
}

int run_evaluate(const CommonOpts& common, const std::string& methods_csv,
                 int episodes, const std::string& checkpoint,
                 const std::string& out_dir, const std::string& sweep,
                 int threads) {
  lof::RunConfig cfg =
      load_config(common.config_path, common.overrides, common.seed);

  std::vector<lof::Method> methods;
  {
    std::string tok;
    std::istringstream ss(methods_csv);
    while (std::getline(ss, tok, ',')) methods.push_back(lof::parse_method(tok));
  }
  if (methods.empty()) throw lof::ConfigError("no methods given");

  std::optional<lof::MlpParams> mlp;
  for (const auto m : methods) {
    if (m == lof::Method::kLof) {
      if (checkpoint.empty())
        throw lof::ConfigError("method lof requires --checkpoint");
      mlp = lof::load_checkpoint(checkpoint).params;
    }
  }

  std::filesystem::create_directories(out_dir);
  const std::uint64_t seed = cfg.get_u64("seed");

  if (sweep.empty()) {
    const auto table = lof::evaluate(cfg.episode(), methods, episodes, seed,
                                     mlp ? &*mlp : nullptr, threads);
    lof::write_results_csv(out_dir + "/results.csv", table, cfg.hash());
    std::cout << "wrote " << out_dir << "/results.csv\n";
    return 0;
  }

  const auto eq = sweep.find('=');
  if (eq == std::string::npos)
    throw lof::ConfigError("--sweep expects key=v1,v2,...");
  const std::string key = expand_sweep_key(sweep.substr(0, eq));
  std::vector<std::string> values;
  {
    std::string tok;
    std::istringstream ss(sweep.substr(eq + 1));
    while (std::getline(ss, tok, ',')) values.push_back(tok);
  }
  if (values.empty()) throw lof::ConfigError("--sweep has no values");

  std::ofstream csv(out_dir + "/results_sweep.csv");
  if (!csv) throw lof::IoError("cannot open sweep results for writing");
  csv << "sweep_key,sweep_value,method,metric,mean,std,n,config_hash\n";

  struct Curves {
    std::vector<lof::SvgSeries> per_metric[4];
  } curves;
  const char* metric_names[4] = {"mse_db", "fg", "mnll", "detection_ratio"};
  for (size_t m = 0; m < methods.size(); ++m) {
    for (auto& pm : curves.per_metric) {
      pm.push_back({lof::method_name(methods[m]), {}, {}});
    }
  }

  for (const auto& v : values) {
    lof::RunConfig swept = cfg;
    swept.set(key, v);
    const auto table = lof::evaluate(swept.episode(), methods, episodes, seed,
                                     mlp ? &*mlp : nullptr, threads);
    const double xv = std::stod(v);
    char buf[200];
    for (size_t m = 0; m < table.size(); ++m) {
      const auto& row = table[m];
      const lof::MetricStats* stats[4] = {&row.mse_db_stats, &row.fg_stats,
                                          &row.mnll_stats,
                                          &row.detection_stats};
      for (int k = 0; k < 4; ++k) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.17g,%.17g,%d,%s\n",
                      key.c_str(), v.c_str(),
                      lof::method_name(row.method).c_str(), metric_names[k],
                      stats[k]->mean, stats[k]->stddev, row.episodes,
                      swept.hash().c_str());
        csv << buf;
        curves.per_metric[k][m].x.push_back(xv);
        curves.per_metric[k][m].y.push_back(stats[k]->mean);
      }
    }
  }
  for (int k = 0; k < 4; ++k) {
    lof::write_svg_lines(out_dir + "/sweep_" + metric_names[k] + ".svg",
                         std::string(metric_names[k]) + " vs " + key, key,
                         metric_names[k], curves.per_metric[k], cfg.hash());
  }
  std::cout << "wrote sweep results to " << out_dir << "\n";
  return 0;
}

int run_simulate(const CommonOpts& common, const std::string& method,
                 const std::string& checkpoint, const std::string& out) {
  const lof::RunConfig cfg =
      load_config(common.config_path, common.overrides, common.seed);
  const lof::Method m = lof::parse_method(method);
  std::optional<lof::MlpParams> mlp;
  if (m == lof::Method::kLof) {
    if (checkpoint.empty())
      throw lof::ConfigError("method lof requires --checkpoint");
    mlp = lof::load_checkpoint(checkpoint).params;
  }
  lof::write_episode_trace(out, cfg.episode(), m, mlp ? &*mlp : nullptr,
                           cfg.get_u64("seed"), cfg.hash());
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "lof: two-stage multi-agent state fusion (local estimation with "
      "learned likelihood weights + robust centralized fusion)"};
  app.require_subcommand(1);
  app.footer(key_listing());

  CommonOpts gen_opts, train_opts, eval_opts, sim_opts;

  auto* gen = app.add_subcommand("generate", "generate a trajectory dataset");
  add_common(gen, gen_opts);
  std::string gen_out = "dataset.txt";
  int gen_n = 0;
  gen->add_option("--out", gen_out, "output dataset path");
  gen->add_option("--n", gen_n, "trajectory count (default train.dataset_size)");

  auto* tr = app.add_subcommand("train", "train the weight generator");
  add_common(tr, train_opts);
  std::string tr_data, tr_ck = "checkpoint.txt", tr_log = "train_log.csv";
  int tr_iters = 0;
  tr->add_option("--data", tr_data, "training dataset path")->required();
  tr->add_option("--out-checkpoint", tr_ck, "checkpoint output path");
  tr->add_option("--out-log", tr_log, "loss log output path");
  tr->add_option("--iterations", tr_iters, "override train.iterations");

  auto* ev = app.add_subcommand("evaluate", "run the evaluation harness");
  add_common(ev, eval_opts);
  std::string ev_methods = "lof,bci,skf", ev_ck, ev_out = "results", ev_sweep;
  int ev_episodes = 100, ev_threads = 1;
  ev->add_option("--methods", ev_methods, "comma-separated methods");
  ev->add_option("--episodes", ev_episodes, "episodes per method");
  ev->add_option("--checkpoint", ev_ck, "checkpoint for method lof");
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--sweep", ev_sweep, "sweep key=v1,v2,... over a config key");
  ev->add_option("--threads", ev_threads, "parallel episode workers");

  auto* sim = app.add_subcommand("simulate", "dump a single-episode trace");
  add_common(sim, sim_opts);
  std::string sim_method = "lof_tm", sim_ck, sim_out = "trace.csv";
  sim->add_option("--method", sim_method, "fusion method for the trace");
  sim->add_option("--checkpoint", sim_ck, "checkpoint for method lof");
  sim->add_option("--out", sim_out, "trace output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return run_generate(gen_opts, gen_out, gen_n);
    if (tr->parsed())
      return run_train(train_opts, tr_data, tr_ck, tr_log, tr_iters);
    if (ev->parsed())
      return run_evaluate(eval_opts, ev_methods, ev_episodes, ev_ck, ev_out,
                          ev_sweep, ev_threads);
    if (sim->parsed())
      return run_simulate(sim_opts, sim_method, sim_ck, sim_out);
  } catch (const lof::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lof::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
