#pragma once

#include <array>
#include <set>
#include <vector>

#include "tsr/types.hpp"

namespace tsr {

// Cells plus predicted adjacency relations, ready for post-processing.
struct LabeledGraph {
  std::vector<Cell> cells;
  std::set<Relation> relations;
};

// Optional introspection into the recovery steps: per cell (in input
// order) the band-index span after geometric assignment and after
// relation repair, as {start_row, end_row, start_col, end_col}.
struct RecoveryDebug {
  std::vector<std::array<int, 4>> geometric_spans;
  std::vector<std::array<int, 4>> repaired_spans;
  int discarded_relations{0};
};

// Converts cells + predicted relations into logical table structure:
//   1. cluster cells into row bands on the y axis and column bands on x
//      (a cell joins the band it overlaps best, if the overlap ratio of
//      its projection against the band's running core is >= 0.5)
//   2. assign each cell the range of bands it overlaps with ratio >= 0.5
//   3. resolve any slot conflicts deterministically in favor of earlier
//      ids, shrinking toward each cell's best band
//   4. repair: a predicted Horizontal relation whose endpoints share no
//      row extends the smaller cell's row range minimally to touch the
//      other's (Vertical/columns analogously); a repair that would
//      overlap another cell is discarded
//   5. renormalize indices densely to 0..n-1
// Deterministic; never throws on any relation set over valid cells.
// Throws std::runtime_error only for an empty cell list and
// std::invalid_argument for malformed cells/relations.
TableStructure recover_structure(const LabeledGraph& graph, RecoveryDebug* debug = nullptr);

// Adjacency relations re-extracted from the recovered structure.
std::set<Relation> relations_of_recovery(const LabeledGraph& graph);

}  // namespace tsr
