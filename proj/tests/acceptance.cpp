// Release gate: runs every oracle-backed criterion once, prints one
// pass/fail line each with its wall time, and exits nonzero if any failed.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "hime/io.hpp"
#include "hime/verify.hpp"

int main() {
  using clock = std::chrono::steady_clock;
  const std::vector<std::function<hime::verify::CriterionResult()>> criteria = {
      hime::verify::criterion_1, hime::verify::criterion_2, hime::verify::criterion_3,
      hime::verify::criterion_4, hime::verify::criterion_5, hime::verify::criterion_6,
      hime::verify::criterion_7, hime::verify::criterion_8, hime::verify::criterion_9,
      hime::verify::criterion_10};

  bool all_pass = true;
  double total_s = 0.0;
  for (const auto& run : criteria) {
    const auto t0 = clock::now();
    const auto c = run();
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    total_s += secs;
    all_pass = all_pass && c.pass;
    std::printf("criterion %2d %s %-36s residual=%-12.3g %6.2fs  %s\n", c.id,
                c.pass ? "pass" : "FAIL", c.name.c_str(), c.residual, secs,
                c.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%s (%.1fs total)\n", all_pass ? "all criteria pass" : "ACCEPTANCE FAILED",
              total_s);
  return all_pass ? 0 : 1;
}
