#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rarts/csv.hpp"
#include "rarts/diagnostics.hpp"
#include "rarts/objective.hpp"
#include "rarts/solvers.hpp"
#include "rarts/supernet.hpp"
#include "rarts/svg.hpp"

namespace rarts {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Quadratic, Search, Retrain, Sweep };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Quadratic: return "quadratic";
    case ExperimentKind::Search: return "search";
    case ExperimentKind::Retrain: return "retrain";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

namespace detail {

// Strict object access: every key must be consumed.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~StrictObject() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(where_ + ": unknown field '" + it.key() + "'");
  }
  bool has(const std::string& key) {
    if (j_.contains(key)) {
      seen_.insert(key);
      return true;
    }
    return false;
  }
  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
    return j_.at(key);
  }
  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  template <typename T>
  T require(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

struct QuadraticInit {
  double alpha0 = 2.0;
  double w0 = -2.0;
  double y0 = 0.0;
};

struct TaskConfig {
  int n_train = 512;
  int n_val = 512;
  int n_test = 512;
  double noise_std = 0.0;
  double teacher_weight_scale = 2.0;
  // reserved for a future additive latency-style penalty; must stay 0 for now
  double op_cost_penalty = 0.0;
};

struct SearchConfig {
  double init_scale = 1.0;
  int retrain_epochs = 3000;
  double retrain_lr = 0.03;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Quadratic;
  SolverKind solver = SolverKind::Rarts;
  HyperParams hyper;
  StopRule stop;
  std::vector<std::uint64_t> seeds = {1};
  QuadraticInit init;
  CellSpec cell;
  TaskConfig task;
  SearchConfig search;
  std::vector<double> lambda_grid;
  std::vector<double> beta_grid;
  std::vector<std::string> genotype;  // for kind=retrain
  std::int64_t log_every = 10;
  std::string out_dir = "out";
};

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  detail::StrictObject root(j, "config");

  const std::string kind = root.require<std::string>("kind");
  if (kind == "quadratic") c.kind = ExperimentKind::Quadratic;
  else if (kind == "search") c.kind = ExperimentKind::Search;
  else if (kind == "retrain") c.kind = ExperimentKind::Retrain;
  else if (kind == "sweep") c.kind = ExperimentKind::Sweep;
  else throw ConfigError("config.kind: unknown kind '" + kind + "'");

  try {
    c.solver = solver_from_string(root.get<std::string>("solver", "rarts"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.solver: ") + e.what());
  }

  if (root.has("hyper")) {
    detail::StrictObject h(j.at("hyper"), "config.hyper");
    c.hyper.lambda = h.get<double>("lambda", c.hyper.lambda);
    c.hyper.beta = h.get<double>("beta", c.hyper.beta);
    c.hyper.eta_w = h.get<double>("eta_w", c.hyper.eta_w);
    c.hyper.eta_y = h.get<double>("eta_y", c.hyper.eta_y);
    c.hyper.eta_alpha = h.get<double>("eta_alpha", c.hyper.eta_alpha);
    c.hyper.xi = h.get<double>("xi", c.hyper.xi);
    c.hyper.fd_epsilon_scale = h.get<double>("fd_epsilon_scale", c.hyper.fd_epsilon_scale);
  }
  if (root.has("stop")) {
    detail::StrictObject s(j.at("stop"), "config.stop");
    c.stop.max_steps = s.get<std::int64_t>("max_steps", c.stop.max_steps);
    c.stop.grad_tol = s.get<double>("grad_tol", c.stop.grad_tol);
    c.stop.divergence_bound = s.get<double>("divergence_bound", c.stop.divergence_bound);
  }
  c.seeds = root.get<std::vector<std::uint64_t>>("seeds", c.seeds);
  if (c.seeds.empty()) throw ConfigError("config.seeds: must be non-empty");

  if (root.has("init")) {
    detail::StrictObject i(j.at("init"), "config.init");
    c.init.alpha0 = i.get<double>("alpha0", c.init.alpha0);
    c.init.w0 = i.get<double>("w0", c.init.w0);
    c.init.y0 = i.get<double>("y0", c.init.y0);
  }
  if (root.has("cell")) {
    detail::StrictObject cc(j.at("cell"), "config.cell");
    c.cell.depth = cc.get<int>("depth", c.cell.depth);
    c.cell.feature_dim = cc.get<int>("feature_dim", c.cell.feature_dim);
    if (cc.has("op_menu")) {
      c.cell.op_menu.clear();
      for (const auto& name : j.at("cell").at("op_menu")) {
        try {
          c.cell.op_menu.push_back(op_from_string(name.get<std::string>()));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("config.cell.op_menu: ") + e.what());
        }
      }
    }
  }
  if (root.has("task")) {
    detail::StrictObject t(j.at("task"), "config.task");
    c.task.n_train = t.get<int>("n_train", c.task.n_train);
    c.task.n_val = t.get<int>("n_val", c.task.n_val);
    c.task.n_test = t.get<int>("n_test", c.task.n_test);
    c.task.noise_std = t.get<double>("noise_std", c.task.noise_std);
    c.task.teacher_weight_scale =
        t.get<double>("teacher_weight_scale", c.task.teacher_weight_scale);
    c.task.op_cost_penalty = t.get<double>("op_cost_penalty", 0.0);
    if (c.task.op_cost_penalty != 0.0)
      throw ConfigError("config.task.op_cost_penalty: reserved, must be 0");
  }
  if (root.has("search")) {
    detail::StrictObject s(j.at("search"), "config.search");
    c.search.init_scale = s.get<double>("init_scale", c.search.init_scale);
    c.search.retrain_epochs = s.get<int>("retrain_epochs", c.search.retrain_epochs);
    c.search.retrain_lr = s.get<double>("retrain_lr", c.search.retrain_lr);
  }
  c.lambda_grid = root.get<std::vector<double>>("lambda_grid", {});
  c.beta_grid = root.get<std::vector<double>>("beta_grid", {});
  c.genotype = root.get<std::vector<std::string>>("genotype", {});
  c.log_every = root.get<std::int64_t>("log_every", c.log_every);
  if (c.log_every < 1) throw ConfigError("config.log_every: must be >= 1");
  c.out_dir = root.get<std::string>("out_dir", c.out_dir);

  if (c.kind == ExperimentKind::Sweep && (c.lambda_grid.empty() || c.beta_grid.empty()))
    throw ConfigError("config: sweep requires non-empty lambda_grid and beta_grid");
  if (c.kind == ExperimentKind::Retrain && c.genotype.empty())
    throw ConfigError("config: retrain requires a genotype");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["solver"] = to_string(c.solver);
  j["hyper"] = {{"lambda", c.hyper.lambda},       {"beta", c.hyper.beta},
                {"eta_w", c.hyper.eta_w},         {"eta_y", c.hyper.eta_y},
                {"eta_alpha", c.hyper.eta_alpha}, {"xi", c.hyper.xi},
                {"fd_epsilon_scale", c.hyper.fd_epsilon_scale}};
  j["stop"] = {{"max_steps", c.stop.max_steps},
               {"grad_tol", c.stop.grad_tol},
               {"divergence_bound", c.stop.divergence_bound}};
  j["seeds"] = c.seeds;
  j["init"] = {{"alpha0", c.init.alpha0}, {"w0", c.init.w0}, {"y0", c.init.y0}};
  json menu = json::array();
  for (OpType op : c.cell.op_menu) menu.push_back(to_string(op));
  j["cell"] = {{"depth", c.cell.depth},
               {"feature_dim", c.cell.feature_dim},
               {"op_menu", menu}};
  j["task"] = {{"n_train", c.task.n_train},
               {"n_val", c.task.n_val},
               {"n_test", c.task.n_test},
               {"noise_std", c.task.noise_std},
               {"teacher_weight_scale", c.task.teacher_weight_scale},
               {"op_cost_penalty", c.task.op_cost_penalty}};
  j["search"] = {{"init_scale", c.search.init_scale},
                 {"retrain_epochs", c.search.retrain_epochs},
                 {"retrain_lr", c.search.retrain_lr}};
  if (!c.lambda_grid.empty()) j["lambda_grid"] = c.lambda_grid;
  if (!c.beta_grid.empty()) j["beta_grid"] = c.beta_grid;
  if (!c.genotype.empty()) j["genotype"] = c.genotype;
  j["log_every"] = c.log_every;
  j["out_dir"] = c.out_dir;
  return j;
}

struct RunReport {
  json config_echo;
  json summary;
  std::vector<std::pair<std::string, std::uintmax_t>> manifest;
  double wall_seconds = 0.0;

  // wall_seconds stays out of the serialized report so identical runs
  // produce identical bytes
  json to_json() const {
    json j;
    j["config"] = config_echo;
    j["summary"] = summary;
    json files = json::array();
    for (const auto& [path, bytes] : manifest)
      files.push_back({{"path", path}, {"bytes", bytes}});
    j["files"] = files;
    return j;
  }
};

namespace detail {

inline void record_file(RunReport& rep, const std::string& path) {
  rep.manifest.emplace_back(path, std::filesystem::file_size(path));
}

inline void write_report(RunReport& rep, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    out << rep.to_json().dump(2) << "\n";
  }
  record_file(rep, path);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

inline CsvTable quadratic_trajectory_table(const Trajectory& traj,
                                           const BilevelObjective& obj,
                                           const HyperParams& hp) {
  CsvTable t;
  t.header = {"t", "alpha", "w", "y", "L_train", "L_val", "L", "r_w", "r_y", "r_alpha"};
  for (const auto& rec : traj) {
    SearchState s{rec.w, rec.y, rec.alpha, rec.t};
    const EquilibriumResidual r = equilibrium_residual(obj, s, hp);
    t.rows.push_back({(double)rec.t, rec.alpha[0], rec.w[0], rec.y[0], rec.l_train,
                      rec.l_val, rec.lagrangian, r.r_w, r.r_y, r.r_alpha});
  }
  return t;
}

}  // namespace detail

inline SearchState quadratic_init_state(const QuadraticInit& init) {
  SearchState s;
  s.w = ParamVector::scalar("w", init.w0);
  s.y = ParamVector::scalar("y", init.y0);
  s.alpha = ParamVector::scalar("alpha", init.alpha0);
  return s;
}

// Runs the configured solver on the solvable quadratic model; writes
// trajectory CSV, report JSON, and a phase plot SVG.
inline RunReport run_quadratic(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::Quadratic)
    throw ConfigError("run_quadratic: config kind is not 'quadratic'");
  detail::Timer timer;
  std::filesystem::create_directories(c.out_dir);

  auto obj = quadratic_objective();
  Trajectory traj = run(c.solver, *obj, quadratic_init_state(c.init), c.hyper,
                        c.stop, c.log_every);

  RunReport rep;
  rep.config_echo = config_to_json(c);

  const std::string csv_path = c.out_dir + "/trajectory.csv";
  CsvTable table = detail::quadratic_trajectory_table(traj, *obj, c.hyper);
  write_csv(csv_path, table);
  detail::record_file(rep, csv_path);

  const std::string svg_path = c.out_dir + "/trajectory.svg";
  PlotSpec spec;
  spec.title = std::string("quadratic / ") + to_string(c.solver);
  const QuadraticEquilibrium fp = quadratic_fixed_point(c.hyper.lambda, c.hyper.beta);
  spec.reference_points.push_back({fp.alpha_bar, fp.w_bar});
  emit_plot(csv_path, svg_path, spec);
  detail::record_file(rep, svg_path);

  const auto& last = traj.back();
  SearchState fin{last.w, last.y, last.alpha, last.t};
  const EquilibriumResidual res = equilibrium_residual(*obj, fin, c.hyper);
  rep.summary = {{"final_t", last.t},
                 {"final_alpha", last.alpha[0]},
                 {"final_w", last.w[0]},
                 {"final_y", last.y[0]},
                 {"final_L", last.lagrangian},
                 {"r_w", res.r_w},
                 {"r_y", res.r_y},
                 {"r_alpha", res.r_alpha}};
  if (c.log_every == 1)
    rep.summary["descent_violations"] = descent_check(traj).size();

  rep.wall_seconds = timer.seconds();
  detail::write_report(rep, c.out_dir + "/report.json");
  return rep;
}

struct SearchOutcome {
  std::uint64_t seed;
  DiscreteCell genotype;
  std::vector<bool> edge_recovered;
  bool all_recovered;
  double search_l_train, search_l_val;
  double retrain_test_mse;
  double retrain_val_mse;
};

namespace detail {

inline json genotype_json(const DiscreteCell& dc) {
  json edges = json::array();
  for (int k : dc.edge_ops) edges.push_back(to_string(dc.cell.op_menu[k]));
  return json{{"edges", edges}};
}

inline SearchState supernet_init_state(const CellSpec& cell, std::uint64_t seed,
                                       double init_scale) {
  SearchState s;
  s.w = init_weights(cell, seed, init_scale);
  s.y = s.w;  // y0 defaults to a copy of w0
  s.alpha = make_arch_params(cell);
  return s;
}

}  // namespace detail

// Stage 1: architecture search on the supernet objective. Stage 2: retrain
// the discretized genotype. Returns per-seed outcomes.
inline SearchOutcome run_search_one(const ExperimentConfig& c, std::uint64_t seed,
                                    Trajectory* traj_out = nullptr) {
  SyntheticTask task = gen_task(seed, c.cell, c.task.n_train, c.task.n_val,
                                c.task.n_test, c.task.noise_std,
                                c.task.teacher_weight_scale);
  auto obj = supernet_objective(c.cell, task);
  SearchState init = detail::supernet_init_state(
      c.cell, detail::splitmix64(seed) ^ 0x5eedULL, c.search.init_scale);

  Trajectory traj = run(c.solver, *obj, std::move(init), c.hyper, c.stop, c.log_every);

  SearchOutcome out;
  out.seed = seed;
  const auto& last = traj.back();
  out.search_l_train = last.l_train;
  out.search_l_val = last.l_val;
  out.genotype = discretize(last.alpha, c.cell);
  out.all_recovered = true;
  for (int e = 0; e < c.cell.depth; ++e) {
    const bool rec = out.genotype.edge_ops[e] == task.teacher.edge_ops[e];
    out.edge_recovered.push_back(rec);
    out.all_recovered = out.all_recovered && rec;
  }

  RetrainResult rt = retrain(out.genotype, task, c.search.retrain_epochs,
                             c.search.retrain_lr, detail::splitmix64(seed) ^ 0x2ed0aeULL);
  out.retrain_test_mse = rt.test_mse;
  out.retrain_val_mse = discrete_mse(out.genotype, rt.weights, task.val_x, task.val_y);
  if (traj_out) *traj_out = std::move(traj);
  return out;
}

inline RunReport run_search(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::Search)
    throw ConfigError("run_search: config kind is not 'search'");
  detail::Timer timer;
  std::filesystem::create_directories(c.out_dir);

  RunReport rep;
  rep.config_echo = config_to_json(c);
  json per_seed = json::array();
  int recovered = 0;

  for (std::uint64_t seed : c.seeds) {
    Trajectory traj;
    SearchOutcome out = run_search_one(c, seed, &traj);

    // trajectory CSV: t,L_train,L_val,L then alpha softmax columns
    CsvTable t;
    t.header = {"t", "L_train", "L_val", "L"};
    for (int e = 0; e < c.cell.depth; ++e)
      for (int k = 0; k < c.cell.menu_size(); ++k)
        t.header.push_back("alpha_" + std::to_string(e) + "_" + std::to_string(k));
    for (const auto& rec : traj) {
      std::vector<double> row = {(double)rec.t, rec.l_train, rec.l_val, rec.lagrangian};
      for (int e = 0; e < c.cell.depth; ++e) {
        Matrix logits = rec.alpha.segment_matrix("alpha_" + std::to_string(e));
        double mx = logits.data[0];
        for (double v : logits.data) mx = std::max(mx, v);
        double sum = 0.0;
        std::vector<double> sm(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k)
          sum += sm[k] = std::exp(logits.data[k] - mx);
        for (double v : sm) row.push_back(v / sum);
      }
      t.rows.push_back(std::move(row));
    }
    const std::string csv_path =
        c.out_dir + "/search_seed" + std::to_string(seed) + ".csv";
    write_csv(csv_path, t);
    detail::record_file(rep, csv_path);

    const std::string geno_path =
        c.out_dir + "/genotype_seed" + std::to_string(seed) + ".json";
    {
      std::ofstream g(geno_path, std::ios::binary);
      g << detail::genotype_json(out.genotype).dump(2) << "\n";
    }
    detail::record_file(rep, geno_path);

    recovered += out.all_recovered ? 1 : 0;
    per_seed.push_back({{"seed", seed},
                        {"genotype", detail::genotype_json(out.genotype)},
                        {"edge_recovered", out.edge_recovered},
                        {"all_recovered", out.all_recovered},
                        {"search_L_train", out.search_l_train},
                        {"search_L_val", out.search_l_val},
                        {"retrain_test_mse", out.retrain_test_mse},
                        {"retrain_val_mse", out.retrain_val_mse}});
  }

  rep.summary = {{"seeds_recovered", recovered},
                 {"seeds_total", c.seeds.size()},
                 {"per_seed", per_seed}};
  rep.wall_seconds = timer.seconds();
  detail::write_report(rep, c.out_dir + "/report.json");
  return rep;
}

// Stage-2 only: retrain a provided genotype on a seeded task.
inline RunReport run_retrain(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::Retrain)
    throw ConfigError("run_retrain: config kind is not 'retrain'");
  detail::Timer timer;
  std::filesystem::create_directories(c.out_dir);

  RunReport rep;
  rep.config_echo = config_to_json(c);
  json per_seed = json::array();
  for (std::uint64_t seed : c.seeds) {
    SyntheticTask task = gen_task(seed, c.cell, c.task.n_train, c.task.n_val,
                                  c.task.n_test, c.task.noise_std,
                                  c.task.teacher_weight_scale);
    DiscreteCell dc;
    dc.cell = c.cell;
    if ((int)c.genotype.size() != c.cell.depth)
      throw ConfigError("retrain: genotype length does not match cell depth");
    for (const std::string& name : c.genotype) {
      const OpType op = op_from_string(name);
      int idx = -1;
      for (int k = 0; k < c.cell.menu_size(); ++k)
        if (c.cell.op_menu[k] == op) idx = k;
      if (idx < 0) throw ConfigError("retrain: op '" + name + "' not in menu");
      dc.edge_ops.push_back(idx);
    }
    RetrainResult rt = retrain(dc, task, c.search.retrain_epochs, c.search.retrain_lr,
                               detail::splitmix64(seed) ^ 0x2ed0aeULL);
    per_seed.push_back({{"seed", seed}, {"test_mse", rt.test_mse}});
  }
  rep.summary = {{"per_seed", per_seed}};
  rep.wall_seconds = timer.seconds();
  detail::write_report(rep, c.out_dir + "/report.json");
  return rep;
}

inline int sweep_worker_count() {
  if (const char* env = std::getenv("RARTS_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? (int)hw : 1;
}

// Cartesian product of lambda_grid x beta_grid x seeds on the quadratic
// model, executed on a bounded worker pool; one aggregated CSV row per run
// in deterministic (lambda, beta, seed) order.
inline RunReport sweep(const ExperimentConfig& c) {
  if (c.kind != ExperimentKind::Sweep)
    throw ConfigError("sweep: config kind is not 'sweep'");
  detail::Timer timer;
  std::filesystem::create_directories(c.out_dir);

  struct Job {
    double lambda, beta;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double lam : c.lambda_grid)
    for (double beta : c.beta_grid)
      for (std::uint64_t seed : c.seeds) jobs.push_back({lam, beta, seed});

  struct Row {
    Job job;
    bool failed = false;
    std::string error;
    double alpha = 0, w = 0, y = 0;
    EquilibriumResidual res{0, 0, 0};
    std::size_t violations = 0;
    bool equilibrium_unique = true;
  };
  std::vector<Row> rows(jobs.size());

  const int workers = std::min<int>(sweep_worker_count(), (int)jobs.size());
  std::vector<std::thread> pool;
  std::mutex next_mu;
  std::size_t next = 0;
  auto work = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(next_mu);
        if (next >= jobs.size()) return;
        i = next++;
      }
      Row& row = rows[i];
      row.job = jobs[i];
      HyperParams hp = c.hyper;
      hp.lambda = jobs[i].lambda;
      hp.beta = jobs[i].beta;
      try {
        quadratic_equilibrium(hp.lambda, hp.beta);
      } catch (const std::invalid_argument&) {
        row.equilibrium_unique = false;
      }
      try {
        auto obj = quadratic_objective();
        Trajectory traj =
            run(c.solver, *obj, quadratic_init_state(c.init), hp, c.stop, 1);
        const auto& last = traj.back();
        row.alpha = last.alpha[0];
        row.w = last.w[0];
        row.y = last.y[0];
        SearchState fin{last.w, last.y, last.alpha, last.t};
        row.res = equilibrium_residual(*obj, fin, hp);
        row.violations = descent_check(traj).size();
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
    }
  };
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  RunReport rep;
  rep.config_echo = config_to_json(c);
  CsvTable t;
  t.header = {"lambda", "beta",    "seed", "failed",     "alpha",
              "w",      "y",       "r_w",  "r_y",        "r_alpha",
              "descent_violations", "equilibrium_unique"};
  json errors = json::array();
  for (const Row& row : rows) {
    t.rows.push_back({row.job.lambda, row.job.beta, (double)row.job.seed,
                      row.failed ? 1.0 : 0.0, row.alpha, row.w, row.y, row.res.r_w,
                      row.res.r_y, row.res.r_alpha, (double)row.violations,
                      row.equilibrium_unique ? 1.0 : 0.0});
    if (row.failed)
      errors.push_back({{"lambda", row.job.lambda},
                        {"beta", row.job.beta},
                        {"seed", row.job.seed},
                        {"error", row.error}});
    if (!row.equilibrium_unique)
      errors.push_back({{"lambda", row.job.lambda},
                        {"beta", row.job.beta},
                        {"seed", row.job.seed},
                        {"error", "quadratic_equilibrium: non-unique"}});
  }
  const std::string csv_path = c.out_dir + "/sweep.csv";
  write_csv(csv_path, t);
  detail::record_file(rep, csv_path);

  rep.summary = {{"runs", jobs.size()}, {"errors", errors}};
  rep.wall_seconds = timer.seconds();
  detail::write_report(rep, c.out_dir + "/report.json");
  return rep;
}

}  // namespace rarts
