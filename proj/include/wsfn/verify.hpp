#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsfn/objectives.hpp"

namespace wsfn {

enum class CheckStatus { pass, fail, skipped };

std::string_view to_string(CheckStatus s);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::skipped;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string comparison = "<=";  // how measured relates to tolerance on a pass
  std::uint64_t seed = 0;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> rows;  // ordered by name

  bool passed() const;
  std::string table() const;
  nlohmann::json to_json() const;
};

/// Every registered check, sorted.
std::vector<std::string> check_names();

/// Runs the selected checks (all when `selection` is empty) at sizes and
/// sample counts pinned per check, seeded from `seed`. Checks run on up to
/// `jobs` threads (0 = hardware concurrency); the report does not depend on
/// the thread count. Throws ConfigError for unknown names.
CheckReport run_property_suite(const std::vector<std::string>& selection = {}, std::uint64_t seed = 7,
                               unsigned jobs = 0);

/// Largest |analytic - finite difference| over all gradient entries divided by
/// the largest finite-difference entry. The oracle is N * dF_N/dx with a
/// centered difference of step rel_step * (1 + |x_k|).
double grad_fd_error(const Objective& obj, const ParticleEnsemble& mu, double rel_step = 1e-5);

/// Objectives used by the suite at pinned sizes; `kind` selects which one.
ObjectivePtr make_check_objective(ObjectiveKind kind, std::uint64_t seed);
/// N random particles suited to the objective returned by make_check_objective.
ParticleEnsemble make_check_ensemble(const Objective& obj, Index n, std::uint64_t seed);

}  // namespace wsfn
