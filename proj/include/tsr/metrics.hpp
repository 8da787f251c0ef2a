#pragma once

#include <set>
#include <string>
#include <vector>

#include "tsr/types.hpp"

namespace tsr {

// One adjacency relation identified by cell contents rather than ids, so
// that outputs of different extractors can be compared. Contents are
// whitespace-stripped at construction. touches_spanning records whether
// either endpoint spans multiple rows or columns in the structure the
// relation came from.
struct ContentRelation {
  std::string a;
  std::string b;
  RelationLabel label{RelationLabel::Horizontal};
  bool touches_spanning{false};
};

struct Metrics {
  double precision{0}, recall{0}, f1{0};
  long correct{0}, predicted{0}, truth{0};
};

// Extracts the id-based adjacency relations of a structure: two cells are
// horizontal neighbors when they appear consecutively (blanks skipped) in
// some grid row, and vertical neighbors analogously per column. Each
// distinct pair yields at most one relation per direction.
std::set<Relation> adjacency_relations(const TableStructure& structure);

// Same adjacency extraction, but emitted as content relations in grid
// reading order (all horizontal relations row by row, then all vertical
// relations column by column). A multiset: distinct cell pairs with equal
// contents stay as separate entries.
std::vector<ContentRelation> relations_from_structure(const TableStructure& structure);

struct RelationFilter {
  bool exclude_empty{false};   // drop relations with an empty endpoint content
  bool spanning_only{false};   // keep only relations touching a spanning cell
};

std::vector<ContentRelation> filter_relations(const std::vector<ContentRelation>& relations,
                                              const RelationFilter& filter);

// Builds Metrics from raw counts, applying the degenerate-input
// conventions (empty predicted/truth sides).
Metrics metrics_from_counts(long correct, long predicted, long truth);

// Compares predicted relations against ground truth with one-to-one
// multiset matching: a predicted relation consumes one unconsumed truth
// relation with the same direction and the same unordered content pair.
Metrics compare(const std::vector<ContentRelation>& predicted,
                const std::vector<ContentRelation>& truth);

struct AggregateMetrics {
  Metrics macro;  // mean of per-table precision/recall, F1 from the means
  Metrics micro;  // precision/recall of summed counts
};

// Throws std::runtime_error on an empty list.
AggregateMetrics aggregate(const std::vector<Metrics>& per_table);

}  // namespace tsr
