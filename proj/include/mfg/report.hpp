#pragma once

#include "mfg/measure.hpp"

#include <map>
#include <string>
#include <vector>

namespace mfg {

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

// A sample that violates (or comes closest to violating) an inequality.
// `values` holds the scalar ingredients needed to re-evaluate it; `clouds`
// holds coupled particle clouds (xi, xi') when the inequality is lifted.
struct Witness {
  std::string description;
  std::map<std::string, double> values;
  std::vector<ParticleCloud> clouds;
};

struct CheckReport {
  std::string condition_name;
  int samples_used = 0;
  std::map<std::string, double> margins;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<Witness> witnesses;

  bool passed() const { return verdict == Verdict::Pass; }
};

// Shared tolerance on inequality margins.
inline constexpr double kMarginTol = -1e-8;

}  // namespace mfg
