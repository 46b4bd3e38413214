// Request/report drivers shared by the C API and the command line.
//
// Each command takes a JSON request (missing keys take defaults, unknown keys
// are rejected) and returns a JSON report plus named text artifacts.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace kem::scenario {

enum Status {
  ok = 0,
  terminated = 2,    // blow-up or singular endpoint before the requested span
  check_failed = 3,  // a verification threshold was missed
};

struct Artifact {
  std::string name;     // file name, e.g. "trajectory.csv"
  std::string content;
};

struct Outcome {
  int status = ok;
  nlohmann::json report;  // always carries schema: 1 and the resolved request
  std::vector<Artifact> artifacts;
};

// Commands:
//   bianchi.solve   e2.shoot   e2.diagnose   e2.bolt   e2.einstein
//   pde.leaf_build  pde.profile  pde.construct  pde.verify  check.algebra
// Throws std::invalid_argument for malformed requests.
Outcome run(const std::string& command, const nlohmann::json& request);

std::vector<std::string> commands();

}  // namespace kem::scenario
