#include "kem/trajectory.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kem {

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::completed: return "completed";
    case StopReason::target: return "target";
    case StopReason::blow_up: return "blow_up";
    case StopReason::positivity_lost: return "positivity_lost";
  }
  return "unknown";
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,a,b,c\n";
  char buf[128];
  for (const auto& s : tr.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s.t, s.a, s.b, s.c);
    os << buf;
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,a,b,c") throw std::runtime_error("trajectory header must be 't,a,b,c'");
  Trajectory tr;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    ABCState s;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf%c", &s.t, &s.a, &s.b, &s.c, &tail) < 4)
      throw std::runtime_error("malformed trajectory row " + std::to_string(row));
    tr.samples.push_back(s);
  }
  if (tr.samples.empty()) throw std::runtime_error("trajectory has no samples");
  return tr;
}

void validate_trajectory(const Trajectory& tr, bool allow_zero_b) {
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const auto& s = tr.samples[i];
    if (i > 0 && !(s.t > tr.samples[i - 1].t))
      throw std::invalid_argument("trajectory times not strictly increasing at sample " + std::to_string(i));
    const bool b_ok = allow_zero_b ? s.b >= 0 : s.b > 0;
    if (!(s.a > 0) || !b_ok || !(s.c > 0))
      throw std::invalid_argument("non-positive state at sample " + std::to_string(i));
  }
}

}  // namespace kem
