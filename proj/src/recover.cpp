#include "tsr/recover.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tsr/metrics.hpp"

namespace tsr {

namespace {

constexpr double kBandOverlapThreshold = 0.5;

struct Band {
  double lo, hi;  // running core: intersection of member intervals
};

// 1-D clustering: cells are processed in the given order; each joins the
// band its interval overlaps best (ratio >= threshold against the band
// core) or opens a new band. Returns per-cell band index, bands sorted by
// the order key of their first member.
struct BandAssignment {
  std::vector<Band> bands;
  std::vector<int> band_of;  // per cell, indexes bands
};

BandAssignment cluster_bands(const std::vector<std::pair<double, double>>& intervals,
                             const std::vector<int>& processing_order) {
  BandAssignment out;
  out.band_of.assign(intervals.size(), -1);
  for (int idx : processing_order) {
    auto [lo, hi] = intervals[idx];
    int best = -1;
    double best_ratio = 0;
    for (size_t b = 0; b < out.bands.size(); ++b) {
      double ratio = interval_overlap_ratio(lo, hi, out.bands[b].lo, out.bands[b].hi);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = static_cast<int>(b);
      }
    }
    if (best >= 0 && best_ratio >= kBandOverlapThreshold) {
      Band& band = out.bands[best];
      band.lo = std::max(band.lo, lo);
      band.hi = std::min(band.hi, hi);
      out.band_of[idx] = best;
    } else {
      out.bands.push_back(Band{lo, hi});
      out.band_of[idx] = static_cast<int>(out.bands.size()) - 1;
    }
  }
  return out;
}

// Sorts bands by center with the given direction and remaps indices.
void sort_bands(BandAssignment& assignment, bool descending) {
  std::vector<int> order(assignment.bands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double ca = 0.5 * (assignment.bands[a].lo + assignment.bands[a].hi);
    double cb = 0.5 * (assignment.bands[b].lo + assignment.bands[b].hi);
    return descending ? ca > cb : ca < cb;
  });
  std::vector<int> rank(order.size());
  for (size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  std::vector<Band> sorted(order.size());
  for (size_t i = 0; i < order.size(); ++i) sorted[i] = assignment.bands[order[i]];
  assignment.bands = std::move(sorted);
  for (int& b : assignment.band_of) b = rank[b];
}

// Range of bands a cell overlaps with ratio >= threshold, plus the single
// best band (the "home" the conflict resolution shrinks toward).
struct BandRange {
  int lo, hi, home;
};

BandRange band_range(double lo, double hi, const std::vector<Band>& bands) {
  int best = 0;
  double best_ratio = -1;
  int qlo = -1, qhi = -1;
  for (size_t b = 0; b < bands.size(); ++b) {
    double ratio = interval_overlap_ratio(lo, hi, bands[b].lo, bands[b].hi);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(b);
    }
    if (ratio >= kBandOverlapThreshold) {
      if (qlo < 0) qlo = static_cast<int>(b);
      qhi = static_cast<int>(b);
    }
  }
  if (qlo < 0) return {best, best, best};
  return {qlo, qhi, best};
}

struct Span {
  int r1, r2, c1, c2;
  int home_r, home_c;
};

class Occupancy {
 public:
  Occupancy(int rows, int cols) : cols_(cols), slots_(rows, std::vector<int>(cols, -1)) {}

  int rows() const { return static_cast<int>(slots_.size()); }

  bool rect_free(int r1, int r2, int c1, int c2, int self) const {
    for (int r = r1; r <= r2; ++r) {
      for (int c = c1; c <= c2; ++c) {
        int v = slots_[r][c];
        if (v >= 0 && v != self) return false;
      }
    }
    return true;
  }

  void claim(int r1, int r2, int c1, int c2, int id) {
    for (int r = r1; r <= r2; ++r) {
      for (int c = c1; c <= c2; ++c) slots_[r][c] = id;
    }
  }

  int append_row() {
    slots_.emplace_back(cols_, -1);
    return rows() - 1;
  }

 private:
  int cols_;
  std::vector<std::vector<int>> slots_;
};

}  // namespace

TableStructure recover_structure(const LabeledGraph& graph, RecoveryDebug* debug) {
  const int n = static_cast<int>(graph.cells.size());
  if (n == 0) throw std::runtime_error("cannot recover structure of an empty table");

  std::vector<int> index_of_id(n, -1);
  for (int i = 0; i < n; ++i) {
    int id = graph.cells[i].id;
    if (id < 0 || id >= n || index_of_id[id] >= 0) {
      throw std::invalid_argument("cell ids must be a permutation of 0..n-1");
    }
    if (!valid_box(graph.cells[i].box)) {
      throw std::invalid_argument("cell " + std::to_string(id) + " has an invalid box");
    }
    index_of_id[id] = i;
  }
  for (const Relation& rel : graph.relations) {
    if (rel.a < 0 || rel.a >= n || rel.b < 0 || rel.b >= n) {
      throw std::invalid_argument("relation references unknown cell id");
    }
  }

  // Row bands: top to bottom (descending y-center). Column bands: left to
  // right (ascending x-center). Ties fall back to input order.
  std::vector<std::pair<double, double>> y_intervals(n), x_intervals(n);
  for (int i = 0; i < n; ++i) {
    y_intervals[i] = {graph.cells[i].box.y1, graph.cells[i].box.y2};
    x_intervals[i] = {graph.cells[i].box.x1, graph.cells[i].box.x2};
  }
  std::vector<int> row_order(n), col_order(n);
  std::iota(row_order.begin(), row_order.end(), 0);
  std::iota(col_order.begin(), col_order.end(), 0);
  std::stable_sort(row_order.begin(), row_order.end(), [&](int a, int b) {
    return graph.cells[a].box.cy() > graph.cells[b].box.cy();
  });
  std::stable_sort(col_order.begin(), col_order.end(), [&](int a, int b) {
    return graph.cells[a].box.cx() < graph.cells[b].box.cx();
  });

  BandAssignment rows = cluster_bands(y_intervals, row_order);
  BandAssignment cols = cluster_bands(x_intervals, col_order);
  sort_bands(rows, /*descending=*/true);   // y grows upward; row 0 on top
  sort_bands(cols, /*descending=*/false);

  std::vector<Span> spans(n);
  for (int i = 0; i < n; ++i) {
    BandRange rr = band_range(y_intervals[i].first, y_intervals[i].second, rows.bands);
    BandRange cr = band_range(x_intervals[i].first, x_intervals[i].second, cols.bands);
    spans[i] = Span{rr.lo, rr.hi, cr.lo, cr.hi, rr.home, cr.home};
  }

  // Conflict resolution: claim slots by ascending cell id, shrinking a
  // conflicting range toward the cell's home slot; as a last resort the
  // cell moves to a fresh row appended at the bottom.
  Occupancy occ(static_cast<int>(rows.bands.size()), static_cast<int>(cols.bands.size()));
  for (int id = 0; id < n; ++id) {
    Span& s = spans[index_of_id[id]];
    while (!occ.rect_free(s.r1, s.r2, s.c1, s.c2, id)) {
      if (s.r2 > s.home_r) {
        --s.r2;
      } else if (s.r1 < s.home_r) {
        ++s.r1;
      } else if (s.c2 > s.home_c) {
        --s.c2;
      } else if (s.c1 < s.home_c) {
        ++s.c1;
      } else {
        s.r1 = s.r2 = s.home_r = occ.append_row();
        s.c1 = s.c2 = s.home_c;
      }
    }
    occ.claim(s.r1, s.r2, s.c1, s.c2, id);
  }

  if (debug) {
    debug->geometric_spans.resize(n);
    for (int i = 0; i < n; ++i) {
      const Span& s = spans[i];
      debug->geometric_spans[i] = {s.r1, s.r2, s.c1, s.c2};
    }
    debug->discarded_relations = 0;
  }

  // Relation repair: make the endpoints of every predicted relation share
  // a row (Horizontal) or column (Vertical) by minimally extending the
  // smaller-span cell; extensions that would overlap another cell are
  // discarded. Processed in canonical relation order.
  for (const Relation& rel : graph.relations) {
    Span& sa = spans[index_of_id[rel.a]];
    Span& sb = spans[index_of_id[rel.b]];
    const bool horizontal = rel.label == RelationLabel::Horizontal;
    int a_lo = horizontal ? sa.r1 : sa.c1, a_hi = horizontal ? sa.r2 : sa.c2;
    int b_lo = horizontal ? sb.r1 : sb.c1, b_hi = horizontal ? sb.r2 : sb.c2;
    if (a_hi >= b_lo && b_hi >= a_lo) continue;  // already share an index

    // the smaller span extends; equal spans extend a (pairs are canonical, a < b)
    const bool extend_a = (a_hi - a_lo) <= (b_hi - b_lo);
    Span& ext = extend_a ? sa : sb;
    const int ext_id = extend_a ? rel.a : rel.b;
    int ext_lo = extend_a ? a_lo : b_lo, ext_hi = extend_a ? a_hi : b_hi;
    int other_lo = extend_a ? b_lo : a_lo, other_hi = extend_a ? b_hi : a_hi;

    int new_lo = ext_lo, new_hi = ext_hi;
    if (ext_hi < other_lo) {
      new_hi = other_lo;
    } else {
      new_lo = other_hi;
    }
    int r1 = horizontal ? new_lo : ext.r1, r2 = horizontal ? new_hi : ext.r2;
    int c1 = horizontal ? ext.c1 : new_lo, c2 = horizontal ? ext.c2 : new_hi;
    if (occ.rect_free(r1, r2, c1, c2, ext_id)) {
      occ.claim(r1, r2, c1, c2, ext_id);
      ext.r1 = r1;
      ext.r2 = r2;
      ext.c1 = c1;
      ext.c2 = c2;
    } else if (debug) {
      debug->discarded_relations += 1;
    }
  }

  if (debug) {
    debug->repaired_spans.resize(n);
    for (int i = 0; i < n; ++i) {
      const Span& s = spans[i];
      debug->repaired_spans[i] = {s.r1, s.r2, s.c1, s.c2};
    }
  }

  // Renormalize indices densely over the rows/columns that are actually
  // covered by some cell.
  std::vector<int> row_map(occ.rows(), -1), col_map(cols.bands.size(), -1);
  for (const Span& s : spans) {
    for (int r = s.r1; r <= s.r2; ++r) row_map[r] = 0;
    for (int c = s.c1; c <= s.c2; ++c) col_map[c] = 0;
  }
  int next_row = 0, next_col = 0;
  for (int& r : row_map) {
    if (r == 0) r = next_row++;
  }
  for (int& c : col_map) {
    if (c == 0) c = next_col++;
  }

  TableStructure structure;
  structure.n_rows = next_row;
  structure.n_cols = next_col;
  structure.cells.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Span& s = spans[i];
    StructuredCell sc;
    sc.cell = graph.cells[i];
    sc.start_row = row_map[s.r1];
    sc.end_row = row_map[s.r2];
    sc.start_col = col_map[s.c1];
    sc.end_col = col_map[s.c2];
    structure.cells.push_back(std::move(sc));
  }
  validate(structure);  // holds by construction
  return structure;
}

std::set<Relation> relations_of_recovery(const LabeledGraph& graph) {
  return adjacency_relations(recover_structure(graph));
}

}  // namespace tsr
