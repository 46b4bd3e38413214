// Exercises the shared library through kem.h only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "kem/kem.h"

using nlohmann::json;

TEST_CASE("version, commands and checksum") {
  CHECK(std::string(kem_version()).size() > 0);
  char* s = nullptr;
  REQUIRE(kem_commands(&s) == KEM_OK);
  CHECK(std::string(s).find("pde.verify\n") != std::string::npos);
  kem_string_free(s);
  CHECK(kem_fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(kem_fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("error codes and messages") {
  char* out = nullptr;
  CHECK(kem_run("nope", "{}", &out) == KEM_E_INVALID);
  CHECK(std::string(kem_last_error()).find("unknown command") != std::string::npos);
  CHECK(kem_run("bianchi.solve", "{not json", &out) == KEM_E_INVALID);
  CHECK(kem_run(nullptr, "{}", &out) == KEM_E_INVALID);
  CHECK(out == nullptr);

  kem_bianchi_params p{0, 0, 0, 1, 0, 1};
  double f[3];
  CHECK(kem_abc_rhs(&p, 1, 1, 1, f) == KEM_E_INVALID);
  p.lambda = 0;
  CHECK(kem_abc_rhs(&p, 1, 1, 1, f) == KEM_OK);
  CHECK(std::string(kem_last_error()).empty());

  kem_frame fr{};
  kem_pqrs st{};
  CHECK(kem_to_pqrs(&fr, nullptr) == KEM_E_INVALID);
  CHECK(kem_to_pqrs(&fr, &st) == KEM_OK);
  CHECK(st.has_S == 0);
}

TEST_CASE("frame algebra round trip") {
  const kem_pqrs s{0.3, -0.2, 0.7, 1.1, 0.4, -0.5, 1};
  kem_frame f;
  REQUIRE(kem_from_pqrs(&s, &f) == KEM_OK);
  double res[4];
  REQUIRE(kem_kahler_residuals(&f, res) == KEM_OK);
  for (double v : res) CHECK(std::abs(v) < 1e-14);
  kem_pqrs back;
  REQUIRE(kem_to_pqrs(&f, &back) == KEM_OK);
  CHECK(back.R == doctest::Approx(s.R));
  CHECK(back.S == doctest::Approx(s.S));
  double lam, d[5];
  CHECK(kem_lambda_constraint(&s, &lam) == KEM_OK);
  CHECK(lam == doctest::Approx(-s.N * (4 * s.L + 2 * s.N - s.P) / 2));
  CHECK(kem_sys_rhs(&s, d) == KEM_OK);
}

TEST_CASE("E2 linearization and shooting") {
  double ev[3], un[3];
  REQUIRE(kem_e2_linearization(2, ev, un) == KEM_OK);
  CHECK(ev[0] == doctest::Approx(4));
  CHECK(ev[2] == doctest::Approx(-8));
  CHECK(un[1] == doctest::Approx(1));
  CHECK(kem_e2_linearization(-1, ev, un) == KEM_E_INVALID);

  kem_trajectory* tr = nullptr;
  REQUIRE(kem_e2_shoot(1, 1e-5, 100, 1e-12, &tr) == KEM_OK);
  CHECK(kem_trajectory_stop(tr) == KEM_STOP_TARGET);
  const size_t n = kem_trajectory_size(tr);
  REQUIRE(n > 10);
  double last[4];
  REQUIRE(kem_trajectory_sample(tr, n - 1, last) == KEM_OK);
  CHECK(last[2] == doctest::Approx(100).epsilon(1e-6));
  CHECK(kem_trajectory_sample(tr, n, last) == KEM_E_INVALID);

  char* csv = nullptr;
  REQUIRE(kem_trajectory_to_csv(tr, &csv) == KEM_OK);
  kem_trajectory* back = nullptr;
  REQUIRE(kem_trajectory_from_csv(csv, &back) == KEM_OK);
  CHECK(kem_trajectory_size(back) == n);
  double x[4];
  REQUIRE(kem_trajectory_sample(back, n - 1, x) == KEM_OK);
  CHECK(x[3] == last[3]);

  char* out = nullptr;
  const std::string req = json{{"trajectory_csv", std::string(csv)}}.dump();
  REQUIRE(kem_run("e2.bolt", req.c_str(), &out) == KEM_OK);
  const auto res = json::parse(out);
  CHECK(res["status"] == 0);
  CHECK(res["artifacts"][0]["name"] == "bolt.csv");
  kem_string_free(out);
  kem_string_free(csv);
  kem_trajectory_free(back);
  kem_trajectory_free(tr);
}

TEST_CASE("Bianchi integration and singular endpoints") {
  kem_bianchi_params p{0, 0, 1, -1, 0, 0};
  const double s0[4] = {0, 0.5, 0.3, 0.5};
  kem_trajectory* tr = nullptr;
  REQUIRE(kem_bianchi_integrate(&p, s0, 5, 1e-10, &tr) == KEM_OK);
  CHECK(kem_trajectory_stop(tr) == KEM_STOP_COMPLETED);
  kem_trajectory_free(tr);
  const double bad[4] = {0, -1, 1, 1};
  CHECK(kem_bianchi_integrate(&p, bad, 5, 1e-10, &tr) == KEM_E_INVALID);
  CHECK(kem_bianchi_integrate(&p, s0, 5, 0, &tr) == KEM_E_INVALID);
}

TEST_CASE("metric handles") {
  char* out = nullptr;
  REQUIRE(kem_run("bianchi.solve", R"({"case":"torus","alpha_eq_ab":true,"a0":0.5,"b0":0.5})", &out) == KEM_OK);
  const auto res = json::parse(out);
  kem_string_free(out);
  std::string metric;
  for (const auto& a : res["artifacts"])
    if (a["name"] == "metric.json") metric = a["content"];
  REQUIRE_FALSE(metric.empty());
  kem_metric* m = nullptr;
  REQUIRE(kem_metric_from_json(metric.c_str(), &m) == KEM_OK);
  CHECK(kem_metric_dim(m) == 4);
  CHECK(kem_metric_nodes(m) == 7 * 5 * 5 * 5);
  double r = 1;
  REQUIRE(kem_metric_max_riemann(m, &r) == KEM_OK);
  CHECK(r < 1e-6);
  REQUIRE(kem_metric_einstein_residual(m, 0, &r) == KEM_OK);
  CHECK(r < 1e-6);
  kem_metric_free(m);
  CHECK(kem_metric_from_json("{}", &m) == KEM_E_INVALID);
}
