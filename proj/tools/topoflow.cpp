// topoflow: generate synthetic data, train, evaluate, run ablations, dump internals.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "topoflow/checkpoint.hpp"
#include "topoflow/config.hpp"
#include "topoflow/dataset_io.hpp"
#include "topoflow/evalkit.hpp"
#include "topoflow/gfd.hpp"
#include "topoflow/train.hpp"

using namespace topoflow;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::vector<std::string> sets;
  std::optional<bool> wind_reorder;
  std::optional<bool> elev_bias;
  bool quiet = false;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg.apply_file(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.data.empty()) cfg.data_dir = c.data;
  if (!c.checkpoint.empty()) cfg.checkpoint = c.checkpoint;
  if (c.wind_reorder) cfg.model.wind_reorder = *c.wind_reorder;
  if (c.elev_bias) cfg.model.elev_bias = *c.elev_bias;
  if (const char* env = std::getenv("TOPOFLOW_THREADS")) {
    int cap = 0;
    try {
      cap = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("TOPOFLOW_THREADS must be a positive integer, got '") + env + "'");
    }
    if (cap < 1) throw ConfigError("TOPOFLOW_THREADS must be >= 1");
    cfg.threads = std::min(cfg.threads, cap);
  }
  cfg.finalize();
  return cfg;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw DataError("cannot write '" + p.string() + "'");
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "config.txt", cfg.echo());
}

/// Dataset statistics follow the data; the model reads the same grid.
data::Dataset load_data(const RunConfig& cfg) {
  auto ds = data::read_dataset(cfg.data_dir);
  if (!(ds.mask.spec() == cfg.grid)) throw ConfigError("dataset grid differs from the configured grid");
  for (const auto& s : ds.samples)
    if (s.lead_times != cfg.horizons) throw ConfigError("dataset horizons differ from data.horizons");
  return ds;
}

int cmd_gen(const RunConfig& cfg, bool quiet) {
  const auto ds = data::generate(cfg);
  data::write_dataset(cfg.data_dir, ds, cfg.echo());
  if (!quiet)
    std::cout << "wrote " << ds.samples.size() << " samples (" << ds.n_train << " train, " << ds.n_val << " val, "
              << ds.n_test << " test) to " << cfg.data_dir.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, bool resume, bool quiet) {
  const auto ds = load_data(cfg);
  echo_config(cfg, cfg.out_dir);
  train::FitOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.config_echo = cfg.echo();
  opts.verbose = !quiet;
  train::FitResult prior;
  if (resume) {
    prior = train::load_state(cfg.out_dir / "train_state.bin", cfg.model);
    opts.resume = &prior.state;
    opts.resume_params = &prior.params;
    opts.resume_best = &prior.best_params;
    opts.resume_log = prior.log;
  }
  const auto r = train::fit(ds.train(), ds.val(), ds.mask, ds.stats, cfg.model, cfg.train, opts);
  if (!quiet)
    std::cout << "steps " << r.state.step << (r.early_stopped ? " (early stop)" : "") << ", best val "
              << std::setprecision(9) << r.state.best_val << ", alpha " << r.best_params.alpha_value() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, bool quiet) {
  const auto ds = load_data(cfg);
  auto params = model::init_params(cfg.model, 0);
  model::load_checkpoint(cfg.checkpoint_path(), params);
  const auto split = ds.n_test > 0 ? ds.test() : ds.val();
  const auto rep = eval::report(split, params, cfg.model, ds.stats, ds.mask);
  echo_config(cfg, cfg.out_dir);
  write_file(cfg.out_dir / "report.txt", rep.to_text());
  write_file(cfg.out_dir / "report.csv", rep.to_csv());
  if (!quiet) std::cout << rep.to_text();
  return 0;
}

int cmd_ablate(const RunConfig& cfg, bool quiet) {
  const auto ds = load_data(cfg);
  echo_config(cfg, cfg.out_dir);
  const bool tiles = cfg.ablate_mode == "tiles";
  const auto variants = tiles ? train::tile_variants(cfg.ablate_tiles) : train::component_variants();
  const auto rows =
      train::ablation_run(ds.train(), ds.val(), ds.mask, ds.stats, cfg.model, cfg.train, variants, cfg.ablate_seeds, !quiet);
  const std::string table = tiles ? train::tile_table(rows) : train::component_table(rows);
  write_file(cfg.out_dir / "ablation_table.txt", table);
  write_file(cfg.out_dir / "ablation_runs.csv", train::rows_csv(rows));
  if (!quiet) std::cout << table;
  return 0;
}

Field square(const model::Matrix& m, const std::string& name) {
  const int n = static_cast<int>(m.rows());
  Field f(GridSpec{n, n, 1, 1, 1}, {name}, {"1"});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f.at(0, i, j) = static_cast<float>(m(i, j));
  return f;
}

Field dump_input(const RunConfig& cfg, const std::string& input) {
  if (!input.empty()) return gfd::read(input);
  const auto ds = load_data(cfg);
  if (cfg.dump_sample >= ds.samples.size()) throw ConfigError("dump.sample out of range");
  return ds.samples[cfg.dump_sample].input;
}

int cmd_dump(const RunConfig& cfg, const std::string& what, const std::string& input, bool quiet) {
  fs::create_directories(cfg.out_dir);
  const Field raw = dump_input(cfg, input);
  if (!(raw.spec() == cfg.grid)) throw DataError("input grid differs from the configured grid");
  if (what == "perm") {
    const auto perm = reorder::build_permutation(raw, cfg.model.wind_mean);
    std::ostringstream os;
    os << "# sector, angle_rad, calm, forward (raster patch index per sequence slot)\n" << std::setprecision(9);
    const int m = cfg.grid.patches_per_sector();
    for (int s = 0; s < cfg.grid.num_sectors(); ++s) {
      os << s << ", " << perm.sector_angle[s] << ", " << (perm.sector_calm[s] ? 1 : 0) << ",";
      for (int k = 0; k < m; ++k) os << ' ' << perm.forward[static_cast<std::size_t>(s * m + k)];
      os << '\n';
    }
    os << "# inverse\n";
    for (std::size_t i = 0; i < perm.inverse.size(); ++i) os << (i ? " " : "") << perm.inverse[i];
    os << '\n';
    write_file(cfg.out_dir / "perm.txt", os.str());
    if (!quiet) std::cout << os.str();
    return 0;
  }
  if (what == "bias") {
    double alpha = topo::alpha_init;
    if (fs::exists(cfg.checkpoint_path())) {
      auto params = model::init_params(cfg.model, 0);
      model::load_checkpoint(cfg.checkpoint_path(), params);
      alpha = params.alpha_value();
    }
    const auto h = topo::patch_elevations(raw, cfg.grid);
    const auto b = topo::build_bias(h, alpha, cfg.model.bias_combine);
    gfd::write(square(b.bias, "bias"), cfg.out_dir / "bias.gfd");
    if (!quiet) std::cout << "alpha " << alpha << ", wrote " << (cfg.out_dir / "bias.gfd").string() << '\n';
    return 0;
  }
  if (what == "attn") {
    auto params = model::init_params(cfg.model, 0);
    model::load_checkpoint(cfg.checkpoint_path(), params);
    const auto in = model::prepare_input(raw, data::read_dataset(cfg.data_dir).stats, cfg.model);
    const auto w = model::layer_attention(in, params, cfg.model, cfg.dump_layer);
    gfd::write(square(w, "attention"), cfg.out_dir / "attn.gfd");
    const auto d = eval::attn_diagnostics({w});
    write_file(cfg.out_dir / "attn.txt", eval::diagnostics_text(d));
    if (!quiet) std::cout << "layer " << cfg.dump_layer << ": mu " << d.mu << ", mean entropy " << d.mean_entropy << '\n';
    return 0;
  }
  throw ConfigError("dump target must be attn, bias or perm");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topoflow: wind- and terrain-guided patch transformer on synthetic transport data"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "config file (key = value)");
    sub->add_option("--seed", c.seed, "root seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--data", c.data, "dataset directory");
    sub->add_option("--set", c.sets, "override a config key (key=value), repeatable");
    sub->add_flag("--quiet", c.quiet, "suppress progress output");
  };
  auto toggles = [&](CLI::App* sub) {
    sub->add_option("--wind-reorder", c.wind_reorder, "wind-guided patch reordering (true|false)");
    sub->add_option("--elev-bias", c.elev_bias, "elevation attention bias (true|false)");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  common(gen);
  auto* tr = app.add_subcommand("train", "train a model");
  common(tr);
  toggles(tr);
  bool resume = false;
  tr->add_flag("--resume", resume, "continue from <out>/train_state.bin");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  common(ev);
  toggles(ev);
  ev->add_option("--checkpoint", c.checkpoint, "checkpoint .gfd (default <out>/checkpoint.gfd)");
  auto* ab = app.add_subcommand("ablate", "component or tile-granularity ablation");
  common(ab);
  auto* du = app.add_subcommand("dump", "write permutation, bias or attention artifacts");
  common(du);
  toggles(du);
  std::string what, input;
  du->add_option("what", what, "attn | bias | perm")->required()->check(CLI::IsMember({"attn", "bias", "perm"}));
  du->add_option("--input", input, "input field .gfd (default: dataset sample dump.sample)");
  du->add_option("--checkpoint", c.checkpoint, "checkpoint .gfd (default <out>/checkpoint.gfd)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << app.help();
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    const RunConfig cfg = resolve(c);
    if (gen->parsed()) return cmd_gen(cfg, c.quiet);
    if (tr->parsed()) return cmd_train(cfg, resume, c.quiet);
    if (ev->parsed()) return cmd_eval(cfg, c.quiet);
    if (ab->parsed()) return cmd_ablate(cfg, c.quiet);
    if (du->parsed()) return cmd_dump(cfg, what, input, c.quiet);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::numeric);
  }
  std::cerr << app.help();
  return static_cast<int>(ErrorKind::usage);
}
