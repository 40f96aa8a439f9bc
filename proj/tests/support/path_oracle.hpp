#pragma once

// Exhaustive path-based oracle for the min-MLU routing problem, independent
// of the node-arc simplex implementation. Demands are decomposed over
// enumerated simple paths; the optimal split is found by enumerating the
// basic solutions of the path LP (exact), with an optional coarse-to-fine
// grid search over the split simplex as a second route for tiny instances.

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "tmpred/rng.hpp"
#include "tmpred/teeval.hpp"

namespace oracle {

/// All simple paths from s to t as sequences of link indices.
std::vector<std::vector<int>> enumerate_paths(const tmpred::Topology& topo, int s, int t);

/// Exact optimum of the path-based LP by basic-solution enumeration.
/// Returns nullopt when some positive demand has no path. Intended for a
/// handful of paths (the system enumeration is combinatorial).
std::optional<double> min_mlu_vertex(const tmpred::Topology& topo,
                                     const Eigen::MatrixXd& demand);

/// Grid search over per-commodity split fractions with shrinking refinement
/// around the incumbent. Valid for small path counts only.
std::optional<double> min_mlu_grid(const tmpred::Topology& topo,
                                   const Eigen::MatrixXd& demand, int rounds = 6);

/// Random strongly-connected-ish topology: a directed ring plus random
/// chords, uniform-ish capacities.
tmpred::Topology random_topology(tmpred::Rng& rng, int nodes, int extra_links);

} // namespace oracle
