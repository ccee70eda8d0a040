#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rarts/experiment.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 divergence, 1 anything else.
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<std::string> solver;
  std::optional<double> lambda, beta, lr_w, lr_y, lr_alpha, xi;
  std::optional<std::int64_t> steps, log_every;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  void apply(rarts::ExperimentConfig& c) const {
    if (solver) c.solver = rarts::solver_from_string(*solver);
    if (lambda) c.hyper.lambda = *lambda;
    if (beta) c.hyper.beta = *beta;
    if (lr_w) c.hyper.eta_w = *lr_w;
    if (lr_y) c.hyper.eta_y = *lr_y;
    if (lr_alpha) c.hyper.eta_alpha = *lr_alpha;
    if (xi) c.hyper.xi = *xi;
    if (steps) c.stop.max_steps = *steps;
    if (log_every) c.log_every = *log_every;
    if (seed) c.seeds = {*seed};
    if (out) c.out_dir = *out;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--solver", ov.solver, "solver: rarts|darts1|darts2|milenas");
  cmd->add_option("--lambda", ov.lambda, "penalty weight lambda");
  cmd->add_option("--beta", ov.beta, "coupling weight beta");
  cmd->add_option("--lr-w", ov.lr_w, "learning rate for w");
  cmd->add_option("--lr-y", ov.lr_y, "learning rate for y");
  cmd->add_option("--lr-alpha", ov.lr_alpha, "learning rate for alpha");
  cmd->add_option("--xi", ov.xi, "darts2 virtual step");
  cmd->add_option("--steps", ov.steps, "max iteration count");
  cmd->add_option("--log-every", ov.log_every, "log every n steps");
  cmd->add_option("--seed", ov.seed, "replace the seed list with one seed");
  cmd->add_option("--out", ov.out, "output directory");
}

rarts::ExperimentConfig load(const std::string& config_path, const Overrides& ov,
                             rarts::ExperimentKind expected) {
  rarts::ExperimentConfig c;
  if (!config_path.empty()) {
    c = rarts::load_config(config_path);
  } else {
    c.kind = expected;
  }
  ov.apply(c);
  if (c.kind != expected)
    throw rarts::ConfigError(std::string("config kind is '") +
                             rarts::to_string(c.kind) + "', subcommand wants '" +
                             rarts::to_string(expected) + "'");
  return c;
}

int dispatch(const std::function<rarts::RunReport()>& fn) {
  try {
    rarts::RunReport rep = fn();
    std::cout << rep.summary.dump(2) << "\n";
    return 0;
  } catch (const rarts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rarts::DivergedError& e) {
    std::cerr << "diverged: " << e.what() << " (last alpha=" << e.last.alpha[0]
              << ")\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relaxed architecture search experiments"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* quad = app.add_subcommand("quadratic", "solvable quadratic model run");
  quad->add_option("--config", config_path, "JSON experiment config");
  add_override_flags(quad, ov);

  auto* search = app.add_subcommand("search", "supernet search + retrain");
  search->add_option("--config", config_path, "JSON experiment config");
  add_override_flags(search, ov);

  auto* retrain = app.add_subcommand("retrain", "retrain a provided genotype");
  retrain->add_option("--config", config_path, "JSON experiment config")->required();
  add_override_flags(retrain, ov);

  auto* sweep_cmd = app.add_subcommand("sweep", "lambda x beta x seed grid");
  sweep_cmd->add_option("--config", config_path, "JSON experiment config")->required();
  add_override_flags(sweep_cmd, ov);

  auto* plot = app.add_subcommand("plot", "render a trajectory CSV to SVG");
  std::string csv_in, svg_out, xcol = "alpha", ycol = "w";
  plot->add_option("csv", csv_in, "trajectory CSV path")->required();
  plot->add_option("svg", svg_out, "output SVG path")->required();
  plot->add_option("--x", xcol, "x column name");
  plot->add_option("--y", ycol, "y column name");

  CLI11_PARSE(app, argc, argv);

  if (quad->parsed())
    return dispatch([&] {
      return rarts::run_quadratic(load(config_path, ov, rarts::ExperimentKind::Quadratic));
    });
  if (search->parsed())
    return dispatch([&] {
      return rarts::run_search(load(config_path, ov, rarts::ExperimentKind::Search));
    });
  if (retrain->parsed())
    return dispatch([&] {
      return rarts::run_retrain(load(config_path, ov, rarts::ExperimentKind::Retrain));
    });
  if (sweep_cmd->parsed())
    return dispatch([&] {
      return rarts::sweep(load(config_path, ov, rarts::ExperimentKind::Sweep));
    });
  if (plot->parsed()) {
    try {
      rarts::PlotSpec spec;
      spec.x_column = xcol;
      spec.y_column = ycol;
      rarts::emit_plot(csv_in, svg_out, spec);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
