// Command-line front end: training runs, verification reports and run
// comparison.

#include "dfrdd/problems.hpp"
#include "dfrdd/vericonst.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dfrdd;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int case_id = 1;
  std::uint64_t seed = 0;
  std::optional<double> lr;
  std::optional<int> iterations;
  std::optional<int> final_iterations;
  std::optional<double> tau;
  std::optional<int> max_ref;
  std::vector<int> modes;
  std::vector<int> quad_points;
  std::optional<double> ridge;
  std::optional<int> global_modes;
  int val_every = 1;
  int error_every = 1;
  std::string out = "out";
  std::string verify;
};

int parse_case(const std::string& s) {
  std::string digits = s.rfind("case", 0) == 0 ? s.substr(4) : s;
  if (digits.size() != 1 || digits[0] < '1' || digits[0] > '5') throw ConfigError("unknown case '" + s + "'");
  return digits[0] - '0';
}

std::vector<int> parse_counts(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " '" + s + "'");
    }
  }
  if (out.empty() || out.size() > 2) throw ConfigError(std::string("bad ") + what + " '" + s + "'");
  for (int v : out) {
    if (v < 1) throw ConfigError(std::string(what) + " must be positive");
  }
  return out;
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

json config_to_json(const RunConfig& c, const CaseSpec& spec) {
  json j;
  j["case"] = c.case_id;
  j["case_name"] = spec.name;
  j["seed"] = c.seed;
  j["lr"] = spec.lr;
  j["iterations"] = spec.refinement ? spec.refinement->iterations : spec.iterations;
  j["final_iterations"] = opt(spec.refinement ? std::optional<int>(spec.refinement->final_iterations) : std::nullopt);
  j["total_iterations"] = spec.total_iterations();
  j["tau"] = opt(spec.refinement ? std::optional<double>(spec.refinement->tau) : std::nullopt);
  j["max_ref"] = opt(spec.refinement ? std::optional<int>(spec.refinement->max_ref) : std::nullopt);
  j["modes"] = c.modes;
  j["quad_points"] = c.quad_points;
  j["ridge"] = opt(c.ridge);
  j["global_modes"] = opt(c.global_modes);
  j["val_every"] = c.val_every;
  j["error_every"] = c.error_every;
  j["out"] = c.out;
  json modes = json::object();
  for (const auto& [id, m] : spec.modes) modes[std::to_string(id)] = m;
  j["box_modes"] = modes;
  return j;
}

void merge_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  json j;
  try {
    j = json::parse(in);
    c.case_id = j.at("case").get<int>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.lr = opt_from<double>(j, "lr");
    c.iterations = opt_from<int>(j, "iterations");
    c.final_iterations = opt_from<int>(j, "final_iterations");
    c.tau = opt_from<double>(j, "tau");
    c.max_ref = opt_from<int>(j, "max_ref");
    c.modes = j.value("modes", std::vector<int>{});
    c.quad_points = j.value("quad_points", std::vector<int>{});
    c.ridge = opt_from<double>(j, "ridge");
    c.global_modes = opt_from<int>(j, "global_modes");
    c.val_every = j.value("val_every", 1);
    c.error_every = j.value("error_every", 1);
    c.out = j.value("out", c.out);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

CaseSpec resolve_case(const RunConfig& c) {
  if (c.global_modes && c.case_id != 4 && c.case_id != 5)
    throw ConfigError("--global-modes applies to cases 4 and 5 only");
  if (c.global_modes && *c.global_modes < 1) throw ConfigError("--global-modes must be positive");
  CaseSpec spec;
  if (c.global_modes) {
    spec = c.case_id == 4 ? case4_reference(*c.global_modes) : case5_reference(*c.global_modes);
  } else {
    spec = case_by_id(c.case_id);
  }
  if (c.lr) {
    if (!(*c.lr > 0.0)) throw ConfigError("--lr must be positive");
    spec.lr = *c.lr;
  }
  if (c.iterations && *c.iterations < 0) throw ConfigError("--iterations must be non-negative");
  if (c.final_iterations && *c.final_iterations < 0) throw ConfigError("--final-iterations must be non-negative");
  if (spec.refinement) {
    if (c.iterations) spec.refinement->iterations = *c.iterations;
    if (c.final_iterations) spec.refinement->final_iterations = *c.final_iterations;
    if (c.tau) spec.refinement->tau = *c.tau;
    if (c.max_ref) spec.refinement->max_ref = *c.max_ref;
    try {
      spec.refinement->validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    if (c.tau || c.max_ref || c.final_iterations)
      throw ConfigError("--tau, --max-ref and --final-iterations apply to adaptive cases only");
    if (c.iterations) {
      spec.iterations = *c.iterations;
      std::erase_if(spec.stages, [&](const StageAddition& s) { return s.at_iteration > spec.iterations; });
    }
  }
  if (c.ridge && !(*c.ridge >= 0.0)) throw ConfigError("--ridge must be non-negative");
  if (c.val_every < 0 || c.error_every < 0) throw ConfigError("cadences must be non-negative");
  try {
    if (!c.modes.empty()) override_modes(spec, c.modes);
    if (!c.quad_points.empty()) override_quad_points(spec, c.quad_points);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int run_training(const RunConfig& c) {
  const CaseSpec spec = resolve_case(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  write_text(out / "config_resolved.json", config_to_json(c, spec).dump(2) + "\n");

  RunSettings settings;
  settings.seed = c.seed;
  settings.train.ridge = c.ridge;
  settings.train.val_every = c.val_every;
  settings.train.error_every = c.error_every;
  const RunResult r = run_case(spec, settings);

  {
    std::ofstream h(out / "history.csv");
    write_history_csv(r.history, h);
  }
  for (std::size_t q = 0; q < r.snapshots.size(); ++q)
    write_text(out / ("cover_level_" + std::to_string(q) + ".json"), cover_to_json(r.snapshots[q]) + "\n");
  write_text(out / "cover_final.json", cover_to_json(r.cover) + "\n");
  for (std::size_t q = 0; q < r.tables.size(); ++q) {
    std::ofstream t(out / ("indicators_level_" + std::to_string(q) + ".csv"));
    write_indicator_csv(r.tables[q], t);
  }
  {
    std::ofstream s(out / "solution.csv");
    write_solution_csv(spec, r.net, s);
  }
  write_text(out / "loss_final.json", loss_to_json(r.final_breakdown) + "\n");
  save_params(r.net, (out / "params").string());

  const HistoryRow& last = r.history.back();
  const double error = std::isnan(last.rel_h1_error_pct) ? make_error_metric(spec)(r.net) : last.rel_h1_error_pct;
  std::cout << spec.name << ": iterations " << last.iteration << ", boxes " << r.cover.boxes.size()
            << ", train loss " << last.train_loss << ", rel H1 error " << error << "%\n";
  return 0;
}

json verify_partition(const Cover& cover, std::uint64_t seed, int samples) {
  const PartitionOfUnity pou(cover);
  const auto singular = find_singular_points(cover);
  std::mt19937_64 rng(seed);
  const MatrixX pts = sample_domain(cover, samples, rng, singular, 1e-3);
  const SampleReport part = partition_identity_check(pou, pts);
  const SampleReport grad = grad_bound_check(pou, pts);
  json j;
  json sp = json::array();
  for (const auto& p : singular) sp.push_back({p.x(), p.y()});
  j["singular_points"] = sp;
  j["partition_pass_rate"] = part.pass_rate();
  j["partition_max_violation"] = part.max_violation;
  j["grad_bound_pass_rate"] = grad.pass_rate();
  j["grad_bound_max_ratio"] = grad.max_violation;
  j["samples"] = samples;
  return j;
}

json verify_gradcheck(const RunConfig& c) {
  const CaseSpec spec = resolve_case(c);
  const BlockFactory factory = block_factory(spec);
  const Discretization disc(make_blocks(spec.cover, spec.modes, RuleRole::Training, factory), spec.cutoff,
                            spec.exact.f);
  Network net = init_params(spec.arch, c.seed);
  const LsSystem sys = disc.assemble(disc.features(net));
  net.set_output_weights(ls_solve(sys, c.ridge.value_or(default_ridge(sys))));
  const LossAndGradient lg = loss_gradient(net, disc);

  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<int> pick(0, net.trainable_count() - 1);
  const VectorX theta = net.flatten();
  const double h = 1e-4;
  VectorX an(50);
  VectorX fd(50);
  for (int k = 0; k < 50; ++k) {
    const int i = pick(rng);
    auto shifted = [&](double d) {
      Network p = net;
      VectorX t = theta;
      t(i) += d;
      p.unflatten(t);
      return loss_value(p, disc);
    };
    // Fourth-order central stencil.
    fd(k) = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
    an(k) = lg.gradient(i);
  }
  json j;
  j["case"] = spec.name;
  j["components"] = 50;
  j["step"] = h;
  j["relative_error"] = (fd - an).norm() / an.norm();
  return j;
}

int run_verify(const RunConfig& c, bool case_given) {
  const fs::path out(c.out);
  fs::create_directories(out);
  json j;
  if (c.verify == "lshape-xi") {
    const Cover cover = case2().cover;
    const json part = verify_partition(cover, c.seed, 10000);
    VerificationReport rep;
    for (const auto& p : part["singular_points"]) rep.singular_points.emplace_back(p[0].get<double>(), p[1].get<double>());
    rep.grad_bound_pass_rate = part["grad_bound_pass_rate"];
    rep.partition_pass_rate = part["partition_pass_rate"];
    rep.grid_N = 128;
    const XiReport xi = xi_estimate(rep.grid_N, 200, c.seed);
    const XiReport fine = xi_estimate(2 * rep.grid_N, 200, c.seed);
    rep.xi_sq_estimate = xi.xi_sq;
    j = json::parse(report_to_json(rep));
    j["xi_sq_estimate_2N"] = fine.xi_sq;
    j["xi_sq_relative_change"] = std::abs(fine.xi_sq - xi.xi_sq) / xi.xi_sq;
  } else if (c.verify == "partition") {
    const int id = case_given ? c.case_id : 2;
    if (id > 3) throw ConfigError("partition verification needs a 2D case (1, 2 or 3)");
    j = verify_partition(case_by_id(id).cover, c.seed, 10000);
    j["case"] = id;
  } else if (c.verify == "gradcheck") {
    RunConfig g = c;
    if (!case_given) g.case_id = 4;
    j = verify_gradcheck(g);
  } else {
    throw ConfigError("unknown verification '" + c.verify + "'");
  }
  write_text(out / ("verify_" + c.verify + ".json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int run_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
  if (dirs.size() < 2) throw ConfigError("compare needs at least two run directories");
  std::ostringstream table;
  table << "run,case,iterations,boxes,train_loss,val_loss,rel_h1_error_pct\n";
  for (const auto& d : dirs) {
    const fs::path dir(d);
    std::ifstream hist(dir / "history.csv");
    std::ifstream cfg(dir / "config_resolved.json");
    std::ifstream cover(dir / "cover_final.json");
    if (!hist || !cfg || !cover) throw ConfigError("incomplete run directory " + d);
    std::string line;
    std::string last;
    std::getline(hist, line);
    while (std::getline(hist, line)) {
      if (!line.empty()) last = line;
    }
    if (last.empty()) throw ConfigError("empty history in " + d);
    const auto cells = split_csv_line(last);
    if (cells.size() != 4) throw ConfigError("malformed history in " + d);
    const json config = json::parse(cfg);
    std::stringstream cover_text;
    cover_text << cover.rdbuf();
    const Cover final_cover = cover_from_json(cover_text.str());
    table << d << ',' << config.value("case_name", std::string{}) << ',' << cells[0] << ','
          << final_cover.boxes.size() << ',' << cells[1] << ',' << cells[2] << ',' << cells[3] << '\n';
  }
  if (out_path.empty()) {
    std::cout << table.str();
  } else {
    write_text(out_path, table.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Fourier residual training on overlapping box covers"};
  app.require_subcommand(1);

  RunConfig config;
  std::string case_text;
  std::string modes_text;
  std::string quad_text;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Train a catalogue case or run a verification");
  run->add_option("--case", case_text, "Case 1..5 (or case1..case5)");
  run->add_option("--config", config_path, "Resolved configuration of an earlier run");
  run->add_option("--seed", config.seed, "Parameter initialisation seed");
  run->add_option("--lr", config.lr, "Adam learning rate");
  run->add_option("--iterations", config.iterations, "Adam steps (per level for adaptive cases)");
  run->add_option("--final-iterations", config.final_iterations, "Adam steps after the last refinement");
  run->add_option("--tau", config.tau, "Marking threshold in (0,1]");
  run->add_option("--max-ref", config.max_ref, "Number of refinements");
  run->add_option("--modes", modes_text, "Modes per box, N or NxM");
  run->add_option("--quad-points", quad_text, "Training cells per box, N or NxM");
  run->add_option("--ridge", config.ridge, "Tikhonov parameter of the output-layer solve");
  run->add_option("--global-modes", config.global_modes, "Single-box reference run with this many modes");
  run->add_option("--val-every", config.val_every, "Validation loss cadence (0 disables)");
  run->add_option("--error-every", config.error_every, "Error cadence (0 disables)");
  run->add_option("--out", config.out, "Output directory");
  run->add_option("--verify", config.verify, "Verification instead of training")
      ->check(CLI::IsMember({"lshape-xi", "partition", "gradcheck"}));

  std::vector<std::string> dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Tabulate final losses and errors of finished runs");
  compare->add_option("dirs", dirs, "Run directories")->required();
  compare->add_option("--out", compare_out, "CSV file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*compare) return run_compare(dirs, compare_out);

    RunConfig c = config;
    if (!config_path.empty()) {
      merge_config_file(c, config_path);
      // Explicit flags still override the file.
      for (const auto* o : run->get_options()) {
        if (o->count() == 0) continue;
        const std::string name = o->get_name();
        if (name == "--seed") c.seed = config.seed;
        if (name == "--lr") c.lr = config.lr;
        if (name == "--iterations") c.iterations = config.iterations;
        if (name == "--final-iterations") c.final_iterations = config.final_iterations;
        if (name == "--tau") c.tau = config.tau;
        if (name == "--max-ref") c.max_ref = config.max_ref;
        if (name == "--ridge") c.ridge = config.ridge;
        if (name == "--global-modes") c.global_modes = config.global_modes;
        if (name == "--val-every") c.val_every = config.val_every;
        if (name == "--error-every") c.error_every = config.error_every;
        if (name == "--out") c.out = config.out;
      }
    }
    if (!case_text.empty()) c.case_id = parse_case(case_text);
    if (!modes_text.empty()) c.modes = parse_counts(modes_text, "--modes");
    if (!quad_text.empty()) c.quad_points = parse_counts(quad_text, "--quad-points");

    if (!c.verify.empty()) return run_verify(c, !case_text.empty() || !config_path.empty());
    if (case_text.empty() && config_path.empty()) throw ConfigError("--case or --config is required");
    return run_training(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "error: training " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
