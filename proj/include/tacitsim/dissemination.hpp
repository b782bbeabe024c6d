#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacitsim/knowledge.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Knowledge dissemination: a discrete susceptible-infected process over the
// relationship graph where the per-edge transmission probability of a fact
// wanes exponentially with the time its holder has carried it.
// ---------------------------------------------------------------------------

struct SpreadParams {
  double alpha = 0.5;           // initial transmission probability
  double decay = 0.8;           // multiplicative waning per step
  double convergence_epsilon = 1e-4;  // stop once every live rate is below this
  int max_steps = 10000;
  std::uint64_t rng_seed = 0;
};

inline void validate_spread_params(const SpreadParams& p) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
  if (!(p.decay > 0.0 && p.decay <= 1.0)) {
    throw std::invalid_argument("decay must lie in (0, 1]");
  }
  if (p.convergence_epsilon <= 0.0) {
    throw std::invalid_argument("convergence_epsilon must be positive");
  }
  if (p.max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
}

/// Probability that a holder passes on a fact it acquired `age` steps ago.
inline double transmission_rate(double alpha, double decay, int age) {
  return alpha * std::pow(decay, age);
}

using FactSet = std::set<Fact>;

struct DisseminationResult {
  EmployeeId patient_zero = 0;                  // seeded holder of the full table
  std::vector<FactSet> knowledge;               // per employee
  std::vector<std::map<Fact, int>> acquired_at;  // step at which each fact arrived
  int steps = 0;
  bool converged = false;  // stopped by epsilon/saturation rather than max_steps

  int holders_of(Fact f) const {
    int n = 0;
    for (const auto& ks : knowledge) n += ks.count(f) ? 1 : 0;
    return n;
  }

  /// Fraction of (employee, fact) pairs that hold, given `n_facts` in play.
  double coverage(int n_facts) const {
    if (knowledge.empty() || n_facts == 0) return 0.0;
    std::size_t held = 0;
    for (const auto& ks : knowledge) held += ks.size();
    return static_cast<double>(held) /
           (static_cast<double>(knowledge.size()) * static_cast<double>(n_facts));
  }
};

/// Called after every completed step with the step index (1-based) and the
/// knowledge state at that point.
using StepObserver = std::function<void(int step, const std::vector<FactSet>&)>;

/// Runs the spread from an explicit initial assignment. Updates are
/// synchronous: transmissions within a step all read the same state, and a
/// fact acquired at step t starts transmitting (at full alpha) at step t+1.
inline DisseminationResult disseminate(const OrgStructure& org,
                                       const std::vector<FactSet>& initial,
                                       const SpreadParams& params,
                                       const StepObserver& observer = {}) {
  validate_spread_params(params);
  if (static_cast<int>(initial.size()) != org.size()) {
    throw std::invalid_argument("initial knowledge must cover every employee");
  }

  DisseminationResult result;
  result.knowledge = initial;
  result.acquired_at.resize(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) {
    for (const Fact& f : initial[i]) result.acquired_at[i][f] = 0;
  }

  std::vector<std::vector<EmployeeId>> adj(static_cast<std::size_t>(org.size()));
  for (const auto& [a, b] : org.relationship_edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());

  Rng rng(params.rng_seed);

  for (int step = 0; step < params.max_steps; ++step) {
    double max_rate = 0.0;
    bool any_susceptible_pair = false;
    // (target, fact) pairs that catch the fact this step; applied afterwards.
    std::vector<std::pair<EmployeeId, Fact>> arrivals;

    for (EmployeeId holder = 0; holder < org.size(); ++holder) {
      const auto& held = result.knowledge[static_cast<std::size_t>(holder)];
      for (const Fact& fact : held) {
        const int age = step - result.acquired_at[static_cast<std::size_t>(holder)].at(fact);
        const double rate = transmission_rate(params.alpha, params.decay, age);
        for (EmployeeId target : adj[static_cast<std::size_t>(holder)]) {
          if (result.knowledge[static_cast<std::size_t>(target)].count(fact)) continue;
          any_susceptible_pair = true;
          max_rate = std::max(max_rate, rate);
          if (rng.bernoulli(rate)) arrivals.push_back({target, fact});
        }
      }
    }

    if (!any_susceptible_pair || max_rate < params.convergence_epsilon) {
      result.converged = true;
      break;
    }

    result.steps = step + 1;
    for (const auto& [target, fact] : arrivals) {
      auto& ks = result.knowledge[static_cast<std::size_t>(target)];
      if (ks.insert(fact).second) {
        result.acquired_at[static_cast<std::size_t>(target)][fact] = step + 1;
      }
    }
    if (observer) observer(step + 1, result.knowledge);
  }

  return result;
}

/// Simulation entry point: patient zero starts out holding every fact of the
/// table. p0 itself is drawn uniformly over all employees (seeded) unless an
/// explicit id is supplied.
inline DisseminationResult disseminate_from_patient_zero(const OrgStructure& org,
                                                         const TableKnowledge& knowledge,
                                                         EmployeeId patient_zero,
                                                         const SpreadParams& params,
                                                         const StepObserver& observer = {}) {
  if (patient_zero < 0 || patient_zero >= org.size()) {
    throw std::out_of_range("patient zero is not an employee");
  }
  std::vector<FactSet> initial(static_cast<std::size_t>(org.size()));
  for (const Fact& f : facts_of(knowledge)) {
    initial[static_cast<std::size_t>(patient_zero)].insert(f);
  }
  DisseminationResult r = disseminate(org, initial, params, observer);
  r.patient_zero = patient_zero;
  return r;
}

inline EmployeeId sample_patient_zero(const OrgStructure& org, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return static_cast<EmployeeId>(rng.uniform_index(static_cast<std::size_t>(org.size())));
}

// ---------------------------------------------------------------------------
// JSON persistence (spread.json).
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SpreadParams& p) {
  j = nlohmann::json{{"alpha", p.alpha},
                     {"decay", p.decay},
                     {"convergence_epsilon", p.convergence_epsilon},
                     {"max_steps", p.max_steps},
                     {"rng_seed", p.rng_seed}};
}

inline void from_json(const nlohmann::json& j, SpreadParams& p) {
  p.alpha = j.at("alpha").get<double>();
  p.decay = j.at("decay").get<double>();
  p.convergence_epsilon = j.at("convergence_epsilon").get<double>();
  p.max_steps = j.at("max_steps").get<int>();
  p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const DisseminationResult& r) {
  nlohmann::json holders = nlohmann::json::array();
  for (std::size_t i = 0; i < r.knowledge.size(); ++i) {
    nlohmann::json entry = nlohmann::json::array();
    for (const Fact& f : r.knowledge[i]) {
      entry.push_back({{"column", f.column_index},
                       {"acquired_at", r.acquired_at[i].at(f)}});
    }
    holders.push_back(std::move(entry));
  }
  j = nlohmann::json{{"patient_zero", r.patient_zero},
                     {"steps", r.steps},
                     {"converged", r.converged},
                     {"holders", std::move(holders)}};
}

inline void from_json(const nlohmann::json& j, DisseminationResult& r) {
  r.patient_zero = j.at("patient_zero").get<int>();
  r.steps = j.at("steps").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.knowledge.clear();
  r.acquired_at.clear();
  for (const auto& entry : j.at("holders")) {
    FactSet ks;
    std::map<Fact, int> times;
    for (const auto& item : entry) {
      Fact f{item.at("column").get<int>()};
      ks.insert(f);
      times[f] = item.at("acquired_at").get<int>();
    }
    r.knowledge.push_back(std::move(ks));
    r.acquired_at.push_back(std::move(times));
  }
}

inline void save_spread(const DisseminationResult& r, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(r).dump(2) + "\n");
}

inline DisseminationResult load_spread(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_file(path)).get<DisseminationResult>();
}

}  // namespace tacitsim
