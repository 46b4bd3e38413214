// kem: command-line harness over the kem C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "kem/kem.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kTerminated = 2, kCheckFailed = 3 };

struct Globals {
  std::optional<double> tol;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <class T>
void flag(CLI::App* app, const std::string& name, json& req, const std::string& key, const std::string& help) {
  app->add_option_function<T>(name, [&req, key](const T& v) { req[key] = v; }, help);
}

void list_flag(CLI::App* app, const std::string& name, json& req, const std::string& key, const std::string& help) {
  app->add_option_function<std::vector<double>>(name, [&req, key](const std::vector<double>& v) { req[key] = v; }, help)
      ->delimiter(',');
}

// runs one command, writes artifacts, report and manifest; returns the exit code
int execute(const std::string& command, json req, const Globals& g, const std::string& report_name) {
  char* out = nullptr;
  const kem_status st = kem_run(command.c_str(), req.dump().c_str(), &out);
  if (st != KEM_OK) {
    std::cerr << "kem: " << kem_last_error() << "\n";
    return st == KEM_E_COMPUTE ? kCheckFailed : kUsage;
  }
  const json res = json::parse(out);
  kem_string_free(out);

  fs::create_directories(g.out_dir);
  json outputs = json::array();
  auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path p = fs::path(g.out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    outputs.push_back({{"path", p.string()}, {"fnv1a64", hex(kem_fnv1a64(content.data(), content.size()))}});
  };
  for (const auto& a : res.at("artifacts")) emit(a.at("name").get<std::string>(), a.at("content").get<std::string>());
  const std::string report = res.at("report").dump(1) + "\n";
  emit(report_name, report);

  json manifest = {{"schema", 1},
                   {"command", command},
                   {"request", res.at("report").value("request", json::object())},
                   {"tol", g.tol ? json(*g.tol) : json(nullptr)},
                   {"seed", g.seed ? json(*g.seed) : json(nullptr)},
                   {"status", res.at("status")},
                   {"outputs", outputs}};
  std::ofstream mf(fs::path(g.out_dir) / "manifest.json");
  mf << manifest.dump(1) << "\n";

  if (!g.quiet) std::cout << report;
  return res.at("status").get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kahler-Einstein metric toolkit"};
  app.require_subcommand(1);
  // `--h` names a harmonic function or a grid spacing, so help is long-form only
  app.set_help_flag("--help", "print this help and exit");
  Globals g;
  app.add_option("--tol", g.tol, "integrator tolerance")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "directory for artifacts");
  app.add_option("--seed", g.seed, "seed for randomized suites");
  app.add_flag("-q,--quiet", g.quiet, "do not print the report");

  std::string command, report_name;
  json req = json::object();
  std::string path_a, path_b;

  // bianchi
  auto* bianchi = app.add_subcommand("bianchi", "diagonal Bianchi type A flows");
  bianchi->require_subcommand(1);
  auto* solve = bianchi->add_subcommand("solve", "integrate, compare with closed forms, check curvature");
  for (const char* k : {"p1", "p2", "p3", "lambda", "alpha", "k", "w3", "t0", "a0", "b0", "c0"})
    flag<double>(solve, std::string("--") + k, req, k, k);
  flag<double>(solve, "--t-start", req, "t_start", "initial time");
  flag<double>(solve, "--t-end", req, "t_end", "final time");
  flag<double>(solve, "--grid-h", req, "grid_h", "finest grid spacing of the curvature check");
  flag<int>(solve, "--sweep", req, "sweep", "number of grid levels h, 2h, 4h, ...");
  flag<std::string>(solve, "--case", req, "case", "poincare|torus|heisenberg|euclidean");
  solve->add_flag_callback("--alpha-eq-ab", [&] { req["alpha_eq_ab"] = true; }, "torus with alpha = a0 b0");
  solve->callback([&] { command = "bianchi.solve"; });

  // e2
  auto* e2 = app.add_subcommand("e2", "complete E(2) metrics");
  e2->require_subcommand(1);
  auto* shoot = e2->add_subcommand("shoot", "shoot along the unstable curve of (q,0,q)");
  flag<double>(shoot, "--q", req, "q", "equilibrium (q,0,q)");
  flag<double>(shoot, "--eps", req, "eps", "initial b offset");
  flag<double>(shoot, "--b-max", req, "b_max", "stop when b reaches this value");
  flag<double>(shoot, "--t-span", req, "t_span", "time span");
  list_flag(shoot, "--start", req, "start", "explicit start a,b,c instead of the unstable curve");
  flag<double>(shoot, "--b-top", req, "b_top", "distances are followed up to this b");
  shoot->callback([&] { command = "e2.shoot"; });

  auto* diag = e2->add_subcommand("diagnose", "invariant and completeness diagnostics of a trajectory");
  diag->add_option("trajectory", path_a, "trajectory CSV")->required();
  flag<double>(diag, "--reference-b", req, "reference_b", "reference orbit for the distance to the bolt");
  flag<double>(diag, "--b-top", req, "b_top", "distances are followed up to this b");
  diag->callback([&] {
    command = "e2.diagnose";
    req["trajectory_csv"] = read_file(path_a);
  });

  auto* bolt = e2->add_subcommand("bolt", "arclength profile and smoothness at the bolt");
  bolt->add_option("trajectory", path_a, "trajectory CSV from e2 shoot")->required();
  bolt->callback([&] {
    command = "e2.bolt";
    req["trajectory_csv"] = read_file(path_a);
  });

  auto* e2ein = e2->add_subcommand("einstein", "finite-difference Einstein check of the 4-metric");
  e2ein->add_option("trajectory", path_a, "trajectory CSV")->required();
  flag<double>(e2ein, "--h", req, "h", "finest spacing");
  flag<int>(e2ein, "--sweep", req, "sweep", "number of levels");
  flag<double>(e2ein, "--t-center", req, "t_center", "grid center in t");
  e2ein->callback([&] {
    command = "e2.einstein";
    req["trajectory_csv"] = read_file(path_a);
  });

  // pde
  auto* pde = app.add_subcommand("pde", "local Ricci-flat Kahler metrics from leaf-like surfaces");
  pde->require_subcommand(1);
  auto* leaf = pde->add_subcommand("leaf-build", "leaf-like metric from a harmonic function");
  flag<std::string>(leaf, "--h", req, "h", "harmonic function of x, y");
  flag<std::string>(leaf, "--ell", req, "ell", "hyperbolic factor of x, y");
  list_flag(leaf, "--domain", req, "domain", "x0,x1,y0,y1");
  flag<std::size_t>(leaf, "--n", req, "n", "nodes per axis");
  leaf->callback([&] { command = "pde.leaf_build"; });

  auto* prof = pde->add_subcommand("profile", "geodesic parallel coordinates and the profile c");
  prof->add_option("--leaf-spec", path_a, "leaf spec JSON");
  prof->add_option("--metric", path_b, "2D metric grid JSON");
  flag<double>(prof, "--x-base", req, "x_base", "base curve x = x_base");
  flag<double>(prof, "--y-min", req, "y_min", "first base parameter");
  flag<double>(prof, "--y-step", req, "y_step", "base parameter spacing");
  flag<std::size_t>(prof, "--n-y", req, "n_y", "base nodes");
  flag<double>(prof, "--X-step", req, "X_step", "spacing along geodesics");
  flag<std::size_t>(prof, "--n-X", req, "n_X", "nodes along geodesics");
  prof->callback([&] {
    command = "pde.profile";
    if (path_a.empty() == path_b.empty()) throw CLI::ValidationError("pass exactly one of --leaf-spec, --metric");
    if (!path_a.empty()) req["leaf_spec"] = read_json_file(path_a);
    if (!path_b.empty()) req["metric"] = read_json_file(path_b);
  });

  auto* cons = pde->add_subcommand("construct", "reduced fields, vec-sys and the 4-metric");
  cons->add_option("--profile", path_a, "profile JSON")->required();
  flag<std::size_t>(cons, "--n-uv", req, "n_uv", "nodes on the u and v axes");
  flag<double>(cons, "--compat-threshold", req, "compat_threshold", "largest accepted compatibility residual");
  cons->callback([&] {
    command = "pde.construct";
    req["profile"] = read_json_file(path_a);
  });

  auto* ver = pde->add_subcommand("verify", "Einstein residual with a Richardson sweep");
  ver->add_option("--metric", path_a, "metric grid JSON")->required();
  flag<double>(ver, "--lambda", req, "lambda", "Einstein constant");
  flag<int>(ver, "--sweep", req, "sweep", "number of levels");
  ver->callback([&] {
    command = "pde.verify";
    req["metric"] = read_json_file(path_a);
  });

  // check
  auto* check = app.add_subcommand("check", "randomized property suites");
  check->require_subcommand(1);
  auto* alg = check->add_subcommand("algebra", "frame algebra, constraint drift and derivative identities");
  flag<std::size_t>(alg, "--n", req, "n", "random samples");
  flag<std::size_t>(alg, "--flows", req, "flows", "random flows");
  alg->callback([&] { command = "check.algebra"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "kem: " << e.what() << "\n";
    return kUsage;
  }

  if (g.tol && (command == "bianchi.solve" || command == "e2.shoot" || command == "e2.bolt" || command == "check.algebra"))
    req["tol"] = *g.tol;
  if (g.seed && command == "check.algebra") req["seed"] = *g.seed;
  report_name = command + ".report.json";
  try {
    return execute(command, req, g, report_name);
  } catch (const std::exception& e) {
    std::cerr << "kem: " << e.what() << "\n";
    return kUsage;
  }
}
