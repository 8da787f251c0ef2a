#include "tsr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "tsr/metrics.hpp"

namespace tsr {

namespace {

// Centers indexed by cell id; throws unless ids are a permutation of 0..n-1.
std::vector<std::pair<double, double>> centers_by_id(const std::vector<Cell>& cells) {
  const size_t n = cells.size();
  std::vector<std::pair<double, double>> centers(n);
  std::vector<char> seen(n, 0);
  for (const Cell& cell : cells) {
    if (cell.id < 0 || static_cast<size_t>(cell.id) >= n || seen[cell.id]) {
      throw std::invalid_argument("cell ids must be a permutation of 0..n-1");
    }
    seen[cell.id] = 1;
    centers[cell.id] = {cell.box.cx(), cell.box.cy()};
  }
  return centers;
}

}  // namespace

std::vector<std::pair<int, int>> knn_edges(const std::vector<Cell>& cells, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const int n = static_cast<int>(cells.size());
  if (n <= 1) return {};
  auto centers = centers_by_id(cells);

  std::set<std::pair<int, int>> edge_set;
  std::vector<std::pair<double, int>> order(n - 1);
  for (int u = 0; u < n; ++u) {
    int idx = 0;
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      double dx = centers[v].first - centers[u].first;
      double dy = centers[v].second - centers[u].second;
      order[idx++] = {dx * dx + dy * dy, v};
    }
    int take = std::min(k, n - 1);
    std::partial_sort(order.begin(), order.begin() + take, order.end());
    for (int i = 0; i < take; ++i) {
      int v = order[i].second;
      edge_set.insert({std::min(u, v), std::max(u, v)});
    }
  }
  return {edge_set.begin(), edge_set.end()};
}

BBox table_box_of(const std::vector<Cell>& cells) {
  if (cells.empty()) throw std::invalid_argument("table box of zero cells");
  BBox tb = cells.front().box;
  for (const Cell& cell : cells) {
    tb.x1 = std::min(tb.x1, cell.box.x1);
    tb.x2 = std::max(tb.x2, cell.box.x2);
    tb.y1 = std::min(tb.y1, cell.box.y1);
    tb.y2 = std::max(tb.y2, cell.box.y2);
  }
  return tb;
}

Eigen::MatrixXd vertex_features(const std::vector<Cell>& cells, const BBox& table_box) {
  const double tw = table_box.width();
  const double th = table_box.height();
  if (tw <= 0 || th <= 0) {
    throw std::runtime_error("degenerate table box (zero width or height)");
  }
  Eigen::MatrixXd f(cells.size(), kVertexFeatureCount);
  for (size_t i = 0; i < cells.size(); ++i) {
    const BBox& b = cells[i].box;
    f(i, 0) = b.width();
    f(i, 1) = b.height();
    f(i, 2) = b.width() / tw;
    f(i, 3) = b.height() / th;
    f(i, 4) = b.cx();
    f(i, 5) = b.cy();
    f(i, 6) = (b.cx() - table_box.x1) / tw;
    f(i, 7) = (b.cy() - table_box.y1) / th;
  }
  return f;
}

Eigen::MatrixXd edge_features(const std::vector<Cell>& cells,
                              const std::vector<std::pair<int, int>>& edges,
                              const BBox& table_box) {
  const double tw = table_box.width();
  const double th = table_box.height();
  if (tw <= 0 || th <= 0) {
    throw std::runtime_error("degenerate table box (zero width or height)");
  }
  const double diag = std::hypot(tw, th);
  std::vector<const BBox*> box_by_id(cells.size(), nullptr);
  for (const Cell& cell : cells) {
    if (cell.id < 0 || static_cast<size_t>(cell.id) >= cells.size()) {
      throw std::invalid_argument("cell ids must be a permutation of 0..n-1");
    }
    box_by_id[cell.id] = &cell.box;
  }
  Eigen::MatrixXd f(edges.size(), kEdgeFeatureCount);
  for (size_t e = 0; e < edges.size(); ++e) {
    const BBox& a = *box_by_id[edges[e].first];
    const BBox& b = *box_by_id[edges[e].second];
    double dx = std::abs(a.cx() - b.cx());
    double dy = std::abs(a.cy() - b.cy());
    double dist = std::hypot(dx, dy);
    f(e, 0) = dist;
    f(e, 1) = dx;
    f(e, 2) = dy;
    f(e, 3) = dist / diag;
    f(e, 4) = dx / tw;
    f(e, 5) = dy / th;
    f(e, 6) = interval_overlap_ratio(a.x1, a.x2, b.x1, b.x2);
    f(e, 7) = interval_overlap_ratio(a.y1, a.y2, b.y1, b.y2);
  }
  return f;
}

LabelReport label_edges(CellGraph& graph, const std::set<Relation>& truth) {
  const int n = static_cast<int>(graph.cells.size());
  std::map<std::pair<int, int>, RelationLabel> by_pair;
  for (const Relation& rel : truth) {
    if (rel.a < 0 || rel.a >= n || rel.b < 0 || rel.b >= n) {
      throw std::runtime_error("truth relation references unknown cell id " +
                               std::to_string(rel.a < 0 || rel.a >= n ? rel.a : rel.b));
    }
    auto [it, inserted] = by_pair.insert({{rel.a, rel.b}, rel.label});
    if (!inserted && it->second != rel.label) {
      throw std::runtime_error("conflicting labels for cell pair (" +
                               std::to_string(rel.a) + "," + std::to_string(rel.b) + ")");
    }
  }
  graph.labels.assign(graph.edges.size(), RelationLabel::NoRelation);
  long covered = 0;
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    auto it = by_pair.find(graph.edges[e]);
    if (it != by_pair.end()) {
      graph.labels[e] = it->second;
      ++covered;
    }
  }
  LabelReport report;
  report.covered = covered;
  report.truth_total = static_cast<long>(by_pair.size());
  report.coverage =
      report.truth_total > 0 ? static_cast<double>(covered) / report.truth_total : 1.0;
  return report;
}

std::set<Relation> truth_relations_of(const TableStructure& structure) {
  return adjacency_relations(structure);
}

CellGraph build_graph(std::vector<Cell> cells, int k) {
  std::sort(cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.id < b.id; });
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].id != static_cast<int>(i)) {
      throw std::invalid_argument("cell ids must be a permutation of 0..n-1");
    }
    if (!valid_box(cells[i].box)) {
      throw std::invalid_argument("cell " + std::to_string(cells[i].id) +
                                  " has an invalid bounding box");
    }
  }
  CellGraph graph;
  graph.edges = knn_edges(cells, k);
  BBox tb = table_box_of(cells);
  graph.vertex_features = vertex_features(cells, tb);
  graph.edge_features = edge_features(cells, graph.edges, tb);
  graph.cells = std::move(cells);
  if (!graph.vertex_features.allFinite() || !graph.edge_features.allFinite()) {
    throw std::runtime_error("non-finite feature value");
  }
  return graph;
}

}  // namespace tsr
