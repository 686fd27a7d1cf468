#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace aga {

struct GradCheckOptions {
  std::uint64_t seed = 1;
  double step = 1e-3;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;
  // Corrupts the analytic gradient of the named case ("" = none, "*" = all).
  std::string inject_fault;
};

struct GradCheckEntry {
  std::string op;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a relu/valve kink
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  const GradCheckEntry* find(const std::string& op) const;
  // One `op=... checked=... skipped=... max_rel_error=... status=...` line per entry.
  std::string format() const;
};

// Central differences in double precision against the tape gradients, for
// every primitive and for full CNN and LSTM forwards on a toy instance
// (m=4, k=8, d=6, c=2, eps=0.25, leaky dropout with a replayed mask).
GradCheckReport run_gradcheck(const GradCheckOptions& options);

}  // namespace aga
