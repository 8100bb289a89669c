// Runs the twelve cross-validation checks and prints one line per check.
// Exit status is nonzero if any check misses its threshold.

#include <fmt/format.h>

#include <cstdio>
#include <cstdlib>
#include <exception>

#include "tcpshare/verify.hpp"

int main() {
  tcpshare::verify::VerifyOptions options;
  int failed = 0;
  for (int id = 1; id <= tcpshare::verify::kCheckCount; ++id) {
    tcpshare::verify::CheckResult r;
    try {
      r = tcpshare::verify::run_check(id, options);
    } catch (const std::exception& e) {
      r.id = id;
      r.name = tcpshare::verify::check_name(id);
      r.detail = fmt::format("error: {}", e.what());
    }
    failed += !r.passed;
    fmt::print("{} {:2d} {:<24} {} [{:.2f} s]\n", r.passed ? "PASS" : "FAIL", r.id, r.name,
               r.detail, r.seconds);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", tcpshare::verify::kCheckCount - failed,
             tcpshare::verify::kCheckCount);
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
