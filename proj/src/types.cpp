#include "tsr/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace tsr {

bool valid_box(const BBox& b) {
  return std::isfinite(b.x1) && std::isfinite(b.x2) && std::isfinite(b.y1) &&
         std::isfinite(b.y2) && b.x1 <= b.x2 && b.y1 <= b.y2;
}

double interval_overlap_ratio(double a1, double a2, double b1, double b2) {
  double inter = std::min(a2, b2) - std::max(a1, b1);
  double smaller = std::min(a2 - a1, b2 - b1);
  if (smaller <= 0) {
    return inter >= 0 ? 1.0 : 0.0;
  }
  double ratio = inter / smaller;
  return ratio < 0 ? 0.0 : (ratio > 1 ? 1.0 : ratio);
}

const char* to_string(RelationLabel label) {
  switch (label) {
    case RelationLabel::Vertical: return "vertical";
    case RelationLabel::Horizontal: return "horizontal";
    case RelationLabel::NoRelation: return "none";
  }
  return "?";
}

Relation canonical_relation(int a, int b, RelationLabel label) {
  if (a == b) {
    throw std::invalid_argument("degenerate relation: cell " + std::to_string(a) +
                                " paired with itself");
  }
  if (label == RelationLabel::NoRelation) {
    throw std::invalid_argument("invalid relation label: NoRelation");
  }
  if (a > b) std::swap(a, b);
  return Relation{a, b, label};
}

Grid grid_of(const TableStructure& structure) {
  if (structure.n_rows <= 0 || structure.n_cols <= 0) {
    throw std::runtime_error("table grid must have positive dimensions");
  }
  Grid grid;
  grid.rows = structure.n_rows;
  grid.cols = structure.n_cols;
  grid.slots.assign(static_cast<size_t>(grid.rows) * grid.cols, std::nullopt);
  for (const StructuredCell& sc : structure.cells) {
    if (sc.start_row < 0 || sc.start_col < 0 || sc.start_row > sc.end_row ||
        sc.start_col > sc.end_col) {
      throw std::runtime_error("cell " + std::to_string(sc.cell.id) +
                               " has an invalid span");
    }
    if (sc.end_row >= grid.rows || sc.end_col >= grid.cols) {
      throw std::runtime_error("cell " + std::to_string(sc.cell.id) +
                               " extends outside the grid");
    }
    for (int r = sc.start_row; r <= sc.end_row; ++r) {
      for (int c = sc.start_col; c <= sc.end_col; ++c) {
        std::optional<int>& slot = grid.at(r, c);
        if (slot.has_value()) {
          throw std::runtime_error("slot overlap at (" + std::to_string(r) + "," +
                                   std::to_string(c) + "): cells " +
                                   std::to_string(*slot) + " and " +
                                   std::to_string(sc.cell.id));
        }
        slot = sc.cell.id;
      }
    }
  }
  return grid;
}

void validate(const TableStructure& structure) {
  grid_of(structure);  // covers spans, bounds and overlap
  for (const StructuredCell& sc : structure.cells) {
    if (sc.cell.id < 0) {
      throw std::runtime_error("negative cell id " + std::to_string(sc.cell.id));
    }
    if (!valid_box(sc.cell.box)) {
      throw std::runtime_error("cell " + std::to_string(sc.cell.id) +
                               " has an invalid bounding box");
    }
  }
}

}  // namespace tsr
