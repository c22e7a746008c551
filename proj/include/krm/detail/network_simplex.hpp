#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "krm/detail/numeric.hpp"

namespace krm::detail {

// Primal network simplex for the balanced transportation problem
//
//   min sum c_ij x_ij  s.t.  sum_j x_ij = supply_i,  sum_i x_ij = demand_j,  x >= 0
//
// on the complete bipartite graph. An artificial root joined to every node
// provides the initial strongly feasible spanning tree; the leaving arc is
// chosen by Cunningham's rule (last blocking arc met when walking the cycle
// from its apex), which rules out cycling under degeneracy. Entering arcs are
// priced in fixed-size blocks in index order; within a block the most
// negative reduced cost wins and ties go to the lowest index.
//
// The tree is rebuilt from its arc list after every pivot, which costs O(nodes)
// and keeps potentials free of incremental drift.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
      : m_(supply.size()), n_(demand.size()), cost_(std::move(cost)) {
    if (m_ == 0 || n_ == 0) throw std::invalid_argument("transport problem needs sources and sinks");
    if (cost_.size() != m_ * n_) throw std::invalid_argument("cost matrix has the wrong size");
    arcs_ = m_ * n_;
    nodes_ = m_ + n_ + 1;
    root_ = m_ + n_;

    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    // Any route through the root costs 2*artificial_ > max_cost, so an optimal
    // flow never uses artificial arcs.
    artificial_ = max_cost + 1.0;
    tolerance_ = 1e-12 * (max_cost + 1.0);

    flow_.assign(arcs_ + m_ + n_, 0.0);
    adjacency_.assign(nodes_, {});
    for (std::size_t i = 0; i < m_; ++i) {
      flow_[arcs_ + i] = supply[i];
      link(arcs_ + i);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      flow_[arcs_ + m_ + j] = demand[j];
      link(arcs_ + m_ + j);
    }
    block_ = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(arcs_))));
    parent_.assign(nodes_, 0);
    pred_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    potential_.assign(nodes_, 0.0);
    rebuild();
  }

  void solve() {
    const std::size_t limit = 50 * (arcs_ + nodes_) + 10000;
    for (;;) {
      const std::size_t entering = find_entering();
      if (entering == kNone) return;
      pivot(entering);
      if (++pivots_ > limit) throw std::runtime_error("network simplex exceeded its pivot limit");
    }
  }

  double flow(std::size_t i, std::size_t j) const { return flow_[i * n_ + j]; }
  // Node potentials pi with c_ij + pi_i - pi_j >= 0 on every arc at optimum.
  double source_potential(std::size_t i) const { return potential_[i]; }
  double sink_potential(std::size_t j) const { return potential_[m_ + j]; }
  std::size_t pivots() const { return pivots_; }
  double artificial_flow() const {
    double s = 0.0;
    for (std::size_t a = arcs_; a < flow_.size(); ++a) s += flow_[a];
    return s;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t tail(std::size_t arc) const {
    if (arc < arcs_) return arc / n_;
    if (arc < arcs_ + m_) return arc - arcs_;
    return root_;
  }
  std::size_t head(std::size_t arc) const {
    if (arc < arcs_) return m_ + arc % n_;
    if (arc < arcs_ + m_) return root_;
    return m_ + (arc - arcs_ - m_);
  }
  double arc_cost(std::size_t arc) const { return arc < arcs_ ? cost_[arc] : artificial_; }

  void link(std::size_t arc) {
    adjacency_[tail(arc)].push_back(arc);
    adjacency_[head(arc)].push_back(arc);
  }
  void unlink(std::size_t arc) {
    for (std::size_t node : {tail(arc), head(arc)}) {
      auto& adj = adjacency_[node];
      adj.erase(std::find(adj.begin(), adj.end(), arc));
    }
  }

  // Parent pointers, depths and potentials (pi_root = 0, pi_v = pi_u + c on u->v).
  void rebuild() {
    std::vector<std::size_t> stack{root_};
    parent_[root_] = kNone;
    pred_[root_] = kNone;
    depth_[root_] = 0;
    potential_[root_] = 0.0;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t arc : adjacency_[u]) {
        if (arc == pred_[u]) continue;
        const bool down = tail(arc) == u;
        const std::size_t v = down ? head(arc) : tail(arc);
        parent_[v] = u;
        pred_[v] = arc;
        depth_[v] = depth_[u] + 1;
        potential_[v] = down ? potential_[u] + arc_cost(arc) : potential_[u] - arc_cost(arc);
        stack.push_back(v);
      }
    }
  }

  std::size_t find_entering() {
    double best = -tolerance_;
    std::size_t best_arc = kNone;
    std::size_t in_block = 0;
    std::size_t arc = next_;
    std::size_t i = arc / n_;
    std::size_t j = arc % n_;
    for (std::size_t scanned = 0; scanned < arcs_; ++scanned) {
      const double rc = cost_[arc] + potential_[i] - potential_[m_ + j];
      if (rc < best) {
        best = rc;
        best_arc = arc;
      }
      ++arc;
      if (++j == n_) {
        j = 0;
        if (++i == m_) {
          i = 0;
          arc = 0;
        }
      }
      if (++in_block == block_) {
        if (best_arc != kNone) {
          next_ = arc;
          return best_arc;
        }
        in_block = 0;
      }
    }
    if (best_arc != kNone) next_ = arc;
    return best_arc;
  }

  std::size_t join_node(std::size_t u, std::size_t v) const {
    while (u != v) {
      if (depth_[u] >= depth_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    return u;
  }

  bool points_up(std::size_t node) const { return tail(pred_[node]) == node; }

  void pivot(std::size_t entering) {
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t first = tail(entering);
    const std::size_t second = head(entering);
    const std::size_t join = join_node(first, second);

    // Flow runs first <- ... <- join on the first path, second -> ... -> join
    // on the second. Blocking arcs are those traversed against their direction.
    double delta = inf;
    std::size_t leave_node = kNone;
    for (std::size_t u = first; u != join; u = parent_[u]) {
      const double d = points_up(u) ? flow_[pred_[u]] : inf;
      if (d < delta) {
        delta = d;
        leave_node = u;
      }
    }
    for (std::size_t u = second; u != join; u = parent_[u]) {
      const double d = points_up(u) ? inf : flow_[pred_[u]];
      if (d <= delta) {
        delta = d;
        leave_node = u;
      }
    }
    if (leave_node == kNone) throw std::runtime_error("unbounded transport cycle");

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (std::size_t u = first; u != join; u = parent_[u]) {
        if (points_up(u)) {
          flow_[pred_[u]] -= delta;
        } else {
          flow_[pred_[u]] += delta;
        }
      }
      for (std::size_t u = second; u != join; u = parent_[u]) {
        if (points_up(u)) {
          flow_[pred_[u]] += delta;
        } else {
          flow_[pred_[u]] -= delta;
        }
      }
    }
    const std::size_t leaving = pred_[leave_node];
    flow_[leaving] = 0.0;
    unlink(leaving);
    link(entering);
    rebuild();
  }

  std::size_t m_, n_, arcs_, nodes_, root_;
  std::vector<double> cost_;
  double artificial_ = 1.0;
  double tolerance_ = 0.0;
  std::vector<double> flow_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::size_t> parent_, pred_, depth_;
  std::vector<double> potential_;
  std::size_t block_ = 16;
  std::size_t next_ = 0;
  std::size_t pivots_ = 0;
};

}  // namespace krm::detail
