#include "doctest.h"
#include "kem/manifest.hpp"
#include "kem/scenarios.hpp"

using namespace kem;
using nlohmann::json;

namespace {

const std::string* artifact(const scenario::Outcome& o, const std::string& name) {
  for (const auto& a : o.artifacts)
    if (a.name == name) return &a.content;
  return nullptr;
}

}  // namespace

TEST_CASE("checksums and manifests") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  const auto m = make_manifest("x.y", json{{"k", 1}});
  CHECK(m["schema"] == 1);
  CHECK(m["command"] == "x.y");
  CHECK(m["request"]["k"] == 1);
}

TEST_CASE("command table and request validation") {
  CHECK(scenario::commands().size() == 10);
  CHECK_THROWS_AS(scenario::run("nope", json::object()), std::invalid_argument);
  CHECK_THROWS_WITH_AS(scenario::run("bianchi.solve", json{{"bogus", 1}}), doctest::Contains("unknown parameter 'bogus'"),
                       std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json::array()), std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"tol", "small"}}), std::invalid_argument);
}

TEST_CASE("bianchi.solve closed-form cases") {
  for (const char* c : {"poincare", "torus", "heisenberg", "euclidean"}) {
    CAPTURE(c);
    const auto o = scenario::run("bianchi.solve", json{{"case", c}, {"alpha", 0.3}});
    CHECK(o.status == scenario::ok);
    CHECK(o.report["closed_form"]["match"] == true);
    CHECK(o.report["closed_form"]["max_deviation"].get<double>() < 1e-9);
    CHECK(o.report["request"]["tol"] == 1e-10);
    REQUIRE(artifact(o, "trajectory.csv"));
  }
}

TEST_CASE("bianchi.solve flat torus") {
  const auto o = scenario::run("bianchi.solve",
                               json{{"case", "torus"}, {"alpha_eq_ab", true}, {"a0", 0.5}, {"b0", 0.5}, {"c0", 1.0}});
  CHECK(o.status == scenario::ok);
  CHECK(o.report["grid"]["flat"] == true);
  const auto* m = artifact(o, "metric.json");
  REQUIRE(m);
  const auto doc = json::parse(*m);
  CHECK(doc["manifest"]["command"] == "bianchi.solve");
  CHECK(doc["manifest"]["request"]["alpha_eq_ab"] == true);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"case", "torus"}, {"alpha_eq_ab", true}, {"alpha", 3}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"case", "heisenberg"}, {"alpha_eq_ab", true}}),
                  std::invalid_argument);
}

TEST_CASE("bianchi.solve parameter errors") {
  CHECK_THROWS_WITH_AS(scenario::run("bianchi.solve", json{{"p3", 0}, {"lambda", 1}, {"alpha", 0}}),
                       doctest::Contains("lambda"), std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"case", "poincare"}, {"p1", 5}}), std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"case", "bianchi9"}}), std::invalid_argument);
  CHECK_THROWS_AS(scenario::run("bianchi.solve", json{{"p3", 1}, {"lambda", -1}, {"a0", -1}}), std::invalid_argument);
}

TEST_CASE("bianchi.solve Einstein flow with a grid check") {
  const auto o = scenario::run("bianchi.solve", json{{"p1", 1}, {"p3", 1}, {"lambda", -1}, {"a0", 1}, {"b0", 0.5},
                                                     {"c0", 1.2}, {"t_end", 0.5}});
  CHECK(o.status == scenario::ok);
  CHECK(o.report["grid"]["einstein_ok"] == true);
}

TEST_CASE("bianchi.solve reports blow-up as an early stop") {
  const auto o = scenario::run("bianchi.solve", json{{"case", "poincare"}, {"t_end", 2.0}});
  CHECK(o.status == scenario::terminated);
  CHECK(o.report["integrator"]["stop"] == "blow_up");
}

TEST_CASE("e2 pipeline") {
  const auto s = scenario::run("e2.shoot", json::object());
  REQUIRE(s.status == scenario::ok);
  CHECK(s.report["flags_ok"] == true);
  CHECK(s.report["completeness"]["ok"] == true);
  const auto* csv = artifact(s, "trajectory.csv");
  REQUIRE(csv);

  const auto d = scenario::run("e2.diagnose", json{{"trajectory_csv", *csv}});
  CHECK(d.status == scenario::ok);
  CHECK(d.report["request"]["trajectory_csv"]["fnv1a64"] == hex64(fnv1a64(*csv)));

  const auto b = scenario::run("e2.bolt", json{{"trajectory_csv", *csv}});
  CHECK(b.status == scenario::ok);
  CHECK(b.report["bolt"]["db_dr_error"].get<double>() < 1e-4);
  CHECK(artifact(b, "bolt.csv"));

  const auto e = scenario::run("e2.einstein", json{{"trajectory_csv", *csv}});
  CHECK(e.status == scenario::ok);
  CHECK(artifact(e, "e2_metric.json"));
}

TEST_CASE("e2.shoot from outside the invariant region") {
  const auto o = scenario::run("e2.shoot", json{{"start", {1.5, 0.1, 1.0}}});
  CHECK(o.status == scenario::ok);
  CHECK(o.report["diagnostics"]["region_ok"] == false);
  CHECK(o.report["classification"]["start_region"] == "below");
  CHECK(o.report["classification"]["backward_stop"] == "blow_up");
  CHECK(o.report["classification"]["diverging"] == "a");
  const auto above = scenario::run("e2.shoot", json{{"start", {1.0, 0.1, 1.5}}, {"b_max", 10}});
  CHECK(above.report["classification"]["start_region"] == "above");
  CHECK(above.report["classification"]["diverging"] == "c");
  CHECK_THROWS_AS(scenario::run("e2.shoot", json{{"start", {1.0, 0.1}}}), std::invalid_argument);
}

TEST_CASE("pde pipeline") {
  const auto leaf = scenario::run("pde.leaf_build", json::object());
  REQUIRE(leaf.status == scenario::ok);
  const auto spec = json::parse(*artifact(leaf, "leaf_spec.json"));
  CHECK(spec["manifest"]["command"] == "pde.leaf_build");

  const auto prof = scenario::run("pde.profile", json{{"leaf_spec", spec}, {"n_X", 33}, {"n_y", 33}, {"X_step", 0.01},
                                                      {"y_step", 0.01}});
  REQUIRE(prof.status == scenario::ok);
  CHECK(prof.report["request"]["leaf_spec"]["fnv1a64"] == hex64(fnv1a64(spec.dump())));
  const auto cp = json::parse(*artifact(prof, "cprofile.json"));

  const auto cons = scenario::run("pde.construct", json{{"profile", cp}});
  REQUIRE(cons.status == scenario::ok);
  CHECK(cons.report["four_metric"]["uv_independent"] == true);
  const auto four = json::parse(*artifact(cons, "four_metric.json"));

  const auto ver = scenario::run("pde.verify", json{{"metric", four}, {"sweep", 2}});
  CHECK(ver.report["source_manifest"]["command"] == "pde.construct");
  CHECK(ver.report["levels"].size() == 2);

  CHECK_THROWS_AS(scenario::run("pde.profile", json{{"leaf_spec", spec}, {"metric", four}}), std::invalid_argument);
}

TEST_CASE("pde.construct fails verification for a profile outside the PDE system") {
  const auto leaf = scenario::run("pde.leaf_build", json{{"n", 65}});
  auto prof = scenario::run("pde.profile",
                            json{{"leaf_spec", json::parse(*artifact(leaf, "leaf_spec.json"))}, {"n_X", 17}, {"n_y", 17}});
  auto doc = json::parse(*artifact(prof, "cprofile.json"));
  auto& vals = doc["c"]["values"];
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = vals[i].get<double>() * (1 + 0.05 * double(i % 17) / 16);
  const auto o = scenario::run("pde.construct", json{{"profile", doc}, {"compat_threshold", 1e-6}});
  CHECK(o.status == scenario::check_failed);
  CHECK(o.report.contains("error"));
}

TEST_CASE("check.algebra") {
  const auto o = scenario::run("check.algebra", json{{"n", 500}, {"flows", 5}});
  CHECK(o.status == scenario::ok);
  CHECK(o.report["pass"] == true);
  const auto again = scenario::run("check.algebra", json{{"n", 500}, {"flows", 5}});
  CHECK(again.report.dump() == o.report.dump());
}
