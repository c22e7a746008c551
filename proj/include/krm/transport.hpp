#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "krm/detail/network_simplex.hpp"
#include "krm/detail/numeric.hpp"
#include "krm/error.hpp"
#include "krm/lipschitz.hpp"
#include "krm/measure.hpp"
#include "krm/metric_space.hpp"

namespace krm {

// Residual/gap tolerance of transport certificates.
inline constexpr double kCertificateTolerance = 1e-9;
// Largest union support accepted by the exact solver.
inline constexpr std::size_t kMaxTransportAtoms = 5000;

struct PlanEntry {
  PointIndex source;  // atom of mu
  PointIndex target;  // atom of nu
  double flow;
  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

// Optimal value of the Kantorovich-Rubinshtein problem with a primal coupling
// and a 1-Lipschitz dual potential on the union support.
struct TransportCertificate {
  double value = 0.0;
  std::vector<PlanEntry> plan;
  LipFunction potential;
};

namespace detail {

inline std::vector<PointIndex> union_support(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<PointIndex> u;
  u.reserve(mu.size() + nu.size());
  const auto a = mu.support();
  const auto b = nu.support();
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

inline void require_probability_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!mu.is_probability() || !nu.is_probability()) {
    throw PreconditionError("Kantorovich-Rubinshtein distance needs probability measures (masses " +
                            std::to_string(mu.mass()) + " and " + std::to_string(nu.mass()) + ")");
  }
}

}  // namespace detail

// Exact H(mu, nu) by the network simplex.
//
// Mass common to both measures at a point stays in place (for metric costs
// some optimal coupling does this), so the simplex only transports the
// positive part of mu - nu onto its negative part. The potential is the
// inf-convolution x -> min_j g_j + dist(x, y_j) of the sink potentials,
// which is 1-Lipschitz and dual optimal, then passed once more through
// mcshane_extend of its own values.
inline TransportCertificate kr_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const SpacePtr space_ptr = common_space(mu.space_ptr(), nu.space_ptr());
  const MetricSpace& space = *space_ptr;
  detail::require_probability_pair(mu, nu);
  const auto support = detail::union_support(mu, nu);
  if (support.size() > kMaxTransportAtoms) {
    throw PreconditionError("transport instance has " + std::to_string(support.size()) +
                            " support points, limit is " + std::to_string(kMaxTransportAtoms));
  }

  TransportCertificate cert;
  std::vector<PointIndex> sources, sinks;
  std::vector<double> supply, demand;
  std::map<std::pair<PointIndex, PointIndex>, double> plan;
  for (PointIndex p : support) {
    const double a = mu.weight_at(p);
    const double b = nu.weight_at(p);
    const double common = std::min(a, b);
    if (common > 0.0) plan[{p, p}] += common;
    if (a > b) {
      sources.push_back(p);
      supply.push_back(a - b);
    } else if (b > a) {
      sinks.push_back(p);
      demand.push_back(b - a);
    }
  }

  std::map<PointIndex, double> potential;
  if (!sources.empty() && !sinks.empty()) {
    detail::CompensatedSum total_supply, total_demand;
    for (double s : supply) total_supply.add(s);
    for (double d : demand) total_demand.add(d);
    const double scale = total_supply.value() / total_demand.value();
    for (double& d : demand) d *= scale;

    std::vector<double> cost(sources.size() * sinks.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      for (std::size_t j = 0; j < sinks.size(); ++j) {
        cost[i * sinks.size() + j] = space.dist_unchecked(sources[i], sinks[j]);
      }
    }
    detail::TransportSimplex simplex(supply, demand, std::move(cost));
    simplex.solve();
    for (std::size_t i = 0; i < sources.size(); ++i) {
      for (std::size_t j = 0; j < sinks.size(); ++j) {
        const double f = simplex.flow(i, j);
        if (f > 0.0) plan[{sources[i], sinks[j]}] += f;
      }
    }
    std::vector<double> sink_value(sinks.size());
    for (std::size_t j = 0; j < sinks.size(); ++j) sink_value[j] = -simplex.sink_potential(j);
    for (PointIndex x : support) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < sinks.size(); ++j) {
        best = std::min(best, sink_value[j] + space.dist_unchecked(x, sinks[j]));
      }
      potential[x] = best;
    }
    // Shift so the potential vanishes at the first support point.
    const double shift = potential.begin()->second;
    for (auto& kv : potential) kv.second -= shift;
    cert.potential = mcshane_extend(potential, space, support);
  } else {
    for (PointIndex x : support) potential[x] = 0.0;
    cert.potential = LipFunction(std::move(potential), 1.0);
  }

  detail::CompensatedSum value;
  cert.plan.reserve(plan.size());
  for (const auto& [key, f] : plan) {
    cert.plan.push_back({key.first, key.second, f});
    value.add(f * space.dist_unchecked(key.first, key.second));
  }
  cert.value = value.value();
  return cert;
}

struct CertificateReport {
  double max_marginal_residual = 0.0;
  double min_flow = 0.0;
  double max_lipschitz_violation = 0.0;
  double cost_residual = 0.0;  // |value - sum flow*dist|
  double duality_gap = 0.0;    // |value - (mu(phi) - nu(phi))|
  bool potential_complete = true;

  bool valid(double tol = kCertificateTolerance) const {
    return potential_complete && min_flow >= 0.0 && max_marginal_residual <= tol &&
           max_lipschitz_violation <= tol && cost_residual <= tol && duality_gap <= tol;
  }
};

// Re-derives every certificate invariant from the measures and the metric.
inline CertificateReport verify_certificate(const TransportCertificate& cert, const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu) {
  const SpacePtr space_ptr = common_space(mu.space_ptr(), nu.space_ptr());
  const MetricSpace& space = *space_ptr;
  CertificateReport report;

  std::map<PointIndex, detail::CompensatedSum> rows, cols;
  detail::CompensatedSum cost;
  for (const PlanEntry& e : cert.plan) {
    space.check_index(e.source);
    space.check_index(e.target);
    report.min_flow = std::min(report.min_flow, e.flow);
    rows[e.source].add(e.flow);
    cols[e.target].add(e.flow);
    cost.add(e.flow * space.dist_unchecked(e.source, e.target));
  }
  auto residuals = [&](const DiscreteMeasure& m, std::map<PointIndex, detail::CompensatedSum>& sums) {
    for (const Atom& a : m.atoms()) {
      auto it = sums.find(a.point);
      const double got = it == sums.end() ? 0.0 : it->second.value();
      report.max_marginal_residual = std::max(report.max_marginal_residual, std::abs(got - a.weight));
      if (it != sums.end()) sums.erase(it);
    }
    for (const auto& [p, s] : sums) {
      report.max_marginal_residual = std::max(report.max_marginal_residual, std::abs(s.value()));
    }
  };
  residuals(mu, rows);
  residuals(nu, cols);
  report.cost_residual = std::abs(cert.value - cost.value());

  const auto support = detail::union_support(mu, nu);
  for (PointIndex p : support) {
    if (!cert.potential.defined_at(p)) report.potential_complete = false;
  }
  if (!report.potential_complete) {
    report.max_lipschitz_violation = std::numeric_limits<double>::infinity();
    report.duality_gap = std::numeric_limits<double>::infinity();
    return report;
  }
  for (std::size_t a = 0; a < support.size(); ++a) {
    const double fa = cert.potential(support[a]);
    for (std::size_t b = a + 1; b < support.size(); ++b) {
      const double excess = std::abs(fa - cert.potential(support[b])) -
                            space.dist_unchecked(support[a], support[b]);
      report.max_lipschitz_violation = std::max(report.max_lipschitz_violation, excess);
    }
  }
  const double dual = integrate(mu, cert.potential) - integrate(nu, cert.potential);
  report.duality_gap = std::abs(cert.value - dual);
  return report;
}

// mu(f) - nu(f) for a 1-Lipschitz f; a lower bound on H(mu, nu).
inline double dual_evaluate(const LipFunction& f, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const SpacePtr space = common_space(mu.space_ptr(), nu.space_ptr());
  const auto support = detail::union_support(mu, nu);
  const double lip = lip_constant_on(f, *space, support);
  if (lip > 1.0 + kCertificateTolerance) {
    throw PreconditionError("dual candidate has Lipschitz constant " + std::to_string(lip) + " > 1");
  }
  return integrate(mu, f) - integrate(nu, f);
}

}  // namespace krm
