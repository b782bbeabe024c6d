#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Synthetic company: a balanced hierarchy tree (visible to the agent) plus
// informal relationship edges (hidden, discovered through referrals).
// ---------------------------------------------------------------------------

using EmployeeId = int;
using Edge = std::pair<EmployeeId, EmployeeId>;  // stored smaller id first

inline Edge make_edge(EmployeeId a, EmployeeId b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

struct Employee {
  EmployeeId id = 0;
  std::string display_name;
  std::string role_title;
  int level = 0;  // 0 = root
  std::optional<EmployeeId> manager_id;

  bool operator==(const Employee&) const = default;
};

struct OrgStructure {
  std::vector<Employee> employees;    // indexed by id
  std::set<Edge> hierarchy_edges;
  std::set<Edge> relationship_edges;  // superset of hierarchy_edges

  int size() const { return static_cast<int>(employees.size()); }

  int max_level() const {
    int m = 0;
    for (const auto& e : employees) m = std::max(m, e.level);
    return m;
  }

  /// Relationship-graph neighbors of `id`, ascending.
  std::vector<EmployeeId> neighbors(EmployeeId id) const {
    std::vector<EmployeeId> out;
    for (const auto& [a, b] : relationship_edges) {
      if (a == id) out.push_back(b);
      if (b == id) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const Employee& employee(EmployeeId id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("unknown employee id");
    return employees[static_cast<std::size_t>(id)];
  }

  bool operator==(const OrgStructure&) const = default;
};

struct OrgParams {
  int n_employees = 1;
  int max_depth = 1;
  double informal_multiplier = 0.0;  // informal edges = round(multiplier * |hierarchy edges|)
  std::uint64_t rng_seed = 0;
};

/// Branching factor for a balanced tree: n^(1/depth).
inline double branching_factor(int n_employees, int depth) {
  if (n_employees < 1 || depth < 1) throw std::invalid_argument("need n >= 1 and depth >= 1");
  return std::pow(static_cast<double>(n_employees), 1.0 / static_cast<double>(depth));
}

namespace detail {

inline const std::vector<std::string>& first_names() {
  static const std::vector<std::string> names = {
      "Ava",   "Noah",  "Mia",   "Liam",  "Zoe",   "Ethan", "Ruth",  "Omar",
      "Lena",  "Hugo",  "Iris",  "Felix", "Nora",  "Dean",  "Tara",  "Victor",
      "Wendy", "Jonas", "Priya", "Marco", "Elsa",  "Ravi",  "Dana",  "Kofi",
  };
  return names;
}

inline const std::vector<std::string>& last_names() {
  static const std::vector<std::string> names = {
      "Alder",   "Brooks",    "Castillo", "Dvorak",  "Ellington", "Ferreira",
      "Grantham", "Hollis",   "Ibarra",   "Jansen",  "Kovacs",    "Lindqvist",
      "Moreau",  "Novak",     "Okafor",   "Petrov",  "Quintana",  "Rosales",
      "Sandoval", "Takahashi", "Umber",    "Valdez",  "Whitfield", "Yamato",
  };
  return names;
}

inline const std::vector<std::string>& role_titles() {
  static const std::vector<std::string> titles = {
      "CEO",        "Vice President", "Director",  "Senior Manager", "Manager",
      "Team Lead",  "Supervisor",     "Specialist", "Senior Analyst", "Analyst",
  };
  return titles;
}

/// Distinct full names, seeded sample without replacement over the name grid.
inline std::vector<std::string> sample_names(int n, Rng& rng) {
  const auto& firsts = first_names();
  const auto& lasts = last_names();
  std::vector<int> combos(firsts.size() * lasts.size());
  for (std::size_t i = 0; i < combos.size(); ++i) combos[i] = static_cast<int>(i);
  rng.shuffle(combos);
  if (static_cast<std::size_t>(n) > combos.size()) {
    throw std::invalid_argument("organization larger than the name pool");
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = combos[static_cast<std::size_t>(i)];
    out.push_back(firsts[static_cast<std::size_t>(c) / lasts.size()] + " " +
                  lasts[static_cast<std::size_t>(c) % lasts.size()]);
  }
  return out;
}

}  // namespace detail

/// Builds the balanced hierarchy tree. Internal nodes receive ceil(b_d)
/// children, filled breadth-first with the remainder attaching to the last
/// level's parents left to right. When the org is too small to reach
/// max_depth at all (n - 1 < max_depth), a caterpillar chain achieving the
/// maximum feasible depth is built instead.
inline OrgStructure build_hierarchy(const OrgParams& params) {
  if (params.n_employees < 1 || params.max_depth < 1) {
    throw std::invalid_argument("OrgParams requires n_employees >= 1 and max_depth >= 1");
  }
  const int n = params.n_employees;

  // parent_of[i] for i >= 1; node 0 is the root. Nodes are created in BFS order.
  std::vector<EmployeeId> parent_of(static_cast<std::size_t>(n), -1);
  std::vector<int> level_of(static_cast<std::size_t>(n), 0);

  if (n - 1 < params.max_depth) {
    // Chain: every node manages the next one.
    for (int i = 1; i < n; ++i) {
      parent_of[static_cast<std::size_t>(i)] = i - 1;
      level_of[static_cast<std::size_t>(i)] = i;
    }
  } else {
    const int children_per_node =
        std::max(1, static_cast<int>(std::ceil(branching_factor(n, params.max_depth) - 1e-9)));
    int next_id = 1;
    std::deque<EmployeeId> frontier{0};
    while (next_id < n) {
      std::deque<EmployeeId> next_frontier;
      for (EmployeeId parent : frontier) {
        for (int c = 0; c < children_per_node && next_id < n; ++c) {
          parent_of[static_cast<std::size_t>(next_id)] = parent;
          level_of[static_cast<std::size_t>(next_id)] =
              level_of[static_cast<std::size_t>(parent)] + 1;
          next_frontier.push_back(next_id);
          ++next_id;
        }
        if (next_id >= n) break;
      }
      frontier = std::move(next_frontier);
    }
  }

  Rng rng(params.rng_seed);
  std::vector<std::string> names = detail::sample_names(n, rng);
  const auto& titles = detail::role_titles();

  OrgStructure org;
  org.employees.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Employee e;
    e.id = i;
    e.display_name = names[static_cast<std::size_t>(i)];
    e.level = level_of[static_cast<std::size_t>(i)];
    e.role_title = titles[static_cast<std::size_t>(e.level) % titles.size()];
    if (i > 0) {
      e.manager_id = parent_of[static_cast<std::size_t>(i)];
      org.hierarchy_edges.insert(make_edge(i, *e.manager_id));
    }
    org.employees.push_back(std::move(e));
  }
  org.relationship_edges = org.hierarchy_edges;
  return org;
}

/// Adds round(multiplier * |hierarchy_edges|) informal edges drawn uniformly
/// without replacement from the non-adjacent pairs, capped at availability.
inline OrgStructure add_informal_edges(OrgStructure org, double multiplier,
                                       std::uint64_t rng_seed) {
  if (multiplier < 0) throw std::invalid_argument("informal multiplier must be >= 0");
  const long want = std::lround(multiplier * static_cast<double>(org.hierarchy_edges.size()));
  if (want == 0) return org;

  std::vector<Edge> candidates;
  for (EmployeeId a = 0; a < org.size(); ++a) {
    for (EmployeeId b = a + 1; b < org.size(); ++b) {
      if (!org.relationship_edges.count({a, b})) candidates.push_back({a, b});
    }
  }
  Rng rng(rng_seed);
  rng.shuffle(candidates);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(want), candidates.size());
  for (std::size_t i = 0; i < take; ++i) org.relationship_edges.insert(candidates[i]);
  return org;
}

inline OrgStructure build_org(const OrgParams& params) {
  OrgStructure org = build_hierarchy(params);
  return add_informal_edges(std::move(org), params.informal_multiplier,
                            mix_seed(params.rng_seed, 0x1f0e));
}

/// Minimum hop count between two employees over the relationship graph.
/// The graph is unweighted, so Dijkstra with unit weights is used.
inline int shortest_distance(const OrgStructure& org, EmployeeId a, EmployeeId b) {
  if (a < 0 || a >= org.size() || b < 0 || b >= org.size()) {
    throw std::out_of_range("shortest_distance: unknown employee id");
  }
  if (a == b) return 0;

  std::vector<std::vector<EmployeeId>> adj(static_cast<std::size_t>(org.size()));
  for (const auto& [u, v] : org.relationship_edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }

  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(org.size()), kInf);
  dist[static_cast<std::size_t>(a)] = 0;
  using Item = std::pair<int, EmployeeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.push({0, a});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    if (u == b) return d;
    for (EmployeeId v : adj[static_cast<std::size_t>(u)]) {
      if (d + 1 < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = d + 1;
        heap.push({d + 1, v});
      }
    }
  }
  // The hierarchy tree spans all employees, so this indicates a corrupt org.
  throw std::logic_error("shortest_distance: employees are disconnected");
}

// ---------------------------------------------------------------------------
// JSON persistence (org.json).
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Employee& e) {
  j = nlohmann::json{{"id", e.id},
                     {"display_name", e.display_name},
                     {"role_title", e.role_title},
                     {"level", e.level}};
  if (e.manager_id) {
    j["manager_id"] = *e.manager_id;
  } else {
    j["manager_id"] = nullptr;
  }
}

inline void from_json(const nlohmann::json& j, Employee& e) {
  e.id = j.at("id").get<int>();
  e.display_name = j.at("display_name").get<std::string>();
  e.role_title = j.at("role_title").get<std::string>();
  e.level = j.at("level").get<int>();
  if (j.at("manager_id").is_null()) {
    e.manager_id.reset();
  } else {
    e.manager_id = j.at("manager_id").get<int>();
  }
}

inline void to_json(nlohmann::json& j, const OrgStructure& org) {
  auto edges_json = [](const std::set<Edge>& edges) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [a, b] : edges) arr.push_back({a, b});
    return arr;
  };
  j = nlohmann::json{{"employees", org.employees},
                     {"hierarchy_edges", edges_json(org.hierarchy_edges)},
                     {"relationship_edges", edges_json(org.relationship_edges)}};
}

inline void from_json(const nlohmann::json& j, OrgStructure& org) {
  org.employees = j.at("employees").get<std::vector<Employee>>();
  org.hierarchy_edges.clear();
  org.relationship_edges.clear();
  for (const auto& e : j.at("hierarchy_edges")) {
    org.hierarchy_edges.insert(make_edge(e.at(0).get<int>(), e.at(1).get<int>()));
  }
  for (const auto& e : j.at("relationship_edges")) {
    org.relationship_edges.insert(make_edge(e.at(0).get<int>(), e.at(1).get<int>()));
  }
}

inline void save_org(const OrgStructure& org, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(org).dump(2) + "\n");
}

inline OrgStructure load_org(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_file(path)).get<OrgStructure>();
}

}  // namespace tacitsim
