#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace tsr {

// Axis-aligned box in PDF points. y grows upward: y1 is the bottom edge,
// y2 the top edge. Sources with a top-down y axis must be flipped when
// they are read in; everything past the ingest boundary assumes this
// convention.
struct BBox {
  double x1{0}, x2{0}, y1{0}, y2{0};

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool operator==(const BBox&) const = default;
};

// True iff all coordinates are finite and x1 <= x2, y1 <= y2.
bool valid_box(const BBox& b);

// Overlap of [a1, a2] and [b1, b2] as intersection length over the
// smaller extent, clamped to [0, 1]. A degenerate interval counts as
// fully overlapping when it touches the other interval.
double interval_overlap_ratio(double a1, double a2, double b1, double b2);

struct Cell {
  int id{0};              // unique within a table, contiguous from 0
  std::string content;
  BBox box;

  bool operator==(const Cell&) const = default;
};

// Edge label space. Vertical/Horizontal are real adjacency directions;
// NoRelation only ever appears on candidate graph edges, never in a
// ground-truth relation set. The enum order is also the tie-break order
// used when classifying.
enum class RelationLabel { Vertical = 0, Horizontal = 1, NoRelation = 2 };

const char* to_string(RelationLabel label);

// Unordered cell pair with a direction, stored canonically with a < b.
struct Relation {
  int a{0};
  int b{0};
  RelationLabel label{RelationLabel::Vertical};

  auto operator<=>(const Relation&) const = default;
};

// Canonicalizes (a, b, label) so that min(a, b) comes first.
// Throws std::invalid_argument if a == b or label is NoRelation.
Relation canonical_relation(int a, int b, RelationLabel label);

// A cell plus its logical coordinates, all inclusive.
struct StructuredCell {
  Cell cell;
  int start_row{0}, end_row{0};
  int start_col{0}, end_col{0};

  // A spanning cell occupies at least two rows or columns.
  bool spanning() const { return end_row > start_row || end_col > start_col; }

  bool operator==(const StructuredCell&) const = default;
};

struct TableStructure {
  std::vector<StructuredCell> cells;
  int n_rows{0};
  int n_cols{0};

  bool operator==(const TableStructure&) const = default;
};

// Dense n_rows x n_cols grid of slots; empty slots are blanks.
struct Grid {
  int rows{0}, cols{0};
  std::vector<std::optional<int>> slots;  // row-major cell ids

  const std::optional<int>& at(int r, int c) const { return slots[r * cols + c]; }
  std::optional<int>& at(int r, int c) { return slots[r * cols + c]; }
};

// Expands a structure into its slot grid. Each cell covers exactly the
// slots inside its row/column spans; uncovered slots stay blank.
// Throws std::runtime_error naming the slot when two cells overlap.
Grid grid_of(const TableStructure& structure);

// Checks all TableStructure invariants (span ordering, grid bounds, no
// slot overlap). Throws std::runtime_error on the first violation.
void validate(const TableStructure& structure);

}  // namespace tsr
