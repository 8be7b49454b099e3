// Runs every acceptance check and prints one PASS/FAIL line per check.
// Usage: lsef_acceptance [check-id ...]; exits 1 when any check fails.

#include <iostream>
#include <string>
#include <vector>

#include "lsef/verify/checks.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> only(argv + 1, argv + argc);
  lsef::verify::Options opts;
  opts.progress = &std::cerr;
  try {
    const auto results = lsef::verify::run_checks(only, opts, std::cout);
    std::size_t failed = 0;
    double total = 0;
    for (const auto& r : results) {
      failed += !r.passed;
      total += r.seconds;
    }
    std::cout << (failed ? "FAILED " : "PASSED ") << results.size() - failed << "/" << results.size()
              << " checks in " << total << " s" << std::endl;
    return failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
