// Sampled (t, a, b, c) solutions and their CSV form.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace kem {

struct ABCState {
  double t = 0, a = 0, b = 0, c = 0;
};

enum class StopReason {
  completed,     // reached t_end
  target,        // a requested stopping condition fired (e.g. b reached b_max)
  blow_up,       // step underflow or a component above the threshold
  positivity_lost,
};

const char* to_string(StopReason r);

struct IntegratorInfo {
  double tol = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  std::string termination;  // integrator status name
};

struct Trajectory {
  std::vector<ABCState> samples;  // strictly increasing t
  IntegratorInfo info;
  StopReason stop = StopReason::completed;

  bool early_stop() const { return stop == StopReason::blow_up || stop == StopReason::positivity_lost; }
  const ABCState& front() const { return samples.front(); }
  const ABCState& back() const { return samples.back(); }
};

// header `t,a,b,c`, %.17g
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);
Trajectory read_trajectory_csv(std::istream& is);

// checks t strictly increasing and a, b, c > 0 (b >= 0 if allow_zero_b)
void validate_trajectory(const Trajectory& tr, bool allow_zero_b = false);

}  // namespace kem
