#pragma once

// The acceptance suite: one named check per criterion, each returning a
// pass/fail verdict, a one-line detail and its wall time.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace lsef::verify {

struct Options {
  // Scales the backward rule of this op by `fault_factor` for the whole
  // run; used to prove the suite catches a corrupted rule.
  std::string fault_op;
  double fault_factor = 1.5;
  std::ostream* progress = nullptr;  // optional per-epoch training lines
};

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Check {
  std::string id;
  std::string title;
  std::function<Outcome(const Options&)> run;
};

struct Result {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

const std::vector<Check>& acceptance_checks();

// Runs the named checks (all when `only` is empty) and writes one
// "PASS|FAIL id (seconds): detail" line per check to `report`. A check
// that throws fails with the error text.
std::vector<Result> run_checks(const std::vector<std::string>& only, const Options& opts, std::ostream& report);

std::string format_line(const Result& r);

}  // namespace lsef::verify
