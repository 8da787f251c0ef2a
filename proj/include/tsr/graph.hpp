#pragma once

#include <Eigen/Dense>
#include <set>
#include <utility>
#include <vector>

#include "tsr/types.hpp"

namespace tsr {

// Geometric feature layout. Vertex features per cell:
//   0 width, 1 height (absolute, pt)
//   2 width, 3 height (relative to the table box)
//   4 x-center, 5 y-center (absolute)
//   6 x-center, 7 y-center (relative to the table box, in [0,1])
// Edge features per cell pair:
//   0 Euclidean center distance, 1 |dx-center|, 2 |dy-center| (absolute)
//   3..5 the same three normalized by table diagonal / width / height
//   6 x-projection overlap ratio, 7 y-projection overlap ratio
//     (intersection length over the smaller extent, in [0,1])
constexpr int kVertexFeatureCount = 8;
constexpr int kEdgeFeatureCount = 8;

// Candidate-edge graph over the cells of one table.
struct CellGraph {
  std::vector<Cell> cells;                 // sorted by id; cells[i].id == i
  std::vector<std::pair<int, int>> edges;  // canonical a < b, sorted, unique
  Eigen::MatrixXd vertex_features;         // |V| x kVertexFeatureCount
  Eigen::MatrixXd edge_features;           // |E| x kEdgeFeatureCount
  std::vector<RelationLabel> labels;       // per edge; empty when unlabeled
};

// Edges from each cell to its k nearest cells by squared center distance,
// ties broken by lower cell id; the union is canonicalized, deduplicated
// and sorted. Cell ids must be a permutation of 0..n-1 (list order is
// free). Complete graph when n - 1 <= k.
std::vector<std::pair<int, int>> knn_edges(const std::vector<Cell>& cells, int k);

// Tight bounding box over all cell boxes.
BBox table_box_of(const std::vector<Cell>& cells);

// Throws std::runtime_error when the table box has zero width or height.
Eigen::MatrixXd vertex_features(const std::vector<Cell>& cells, const BBox& table_box);

Eigen::MatrixXd edge_features(const std::vector<Cell>& cells,
                              const std::vector<std::pair<int, int>>& edges,
                              const BBox& table_box);

struct LabelReport {
  double coverage{1.0};  // |truth relations present as edges| / |truth|
  long covered{0};
  long truth_total{0};
};

// Assigns each edge the label of the matching truth relation, NoRelation
// otherwise. Truth relations referencing unknown cell ids throw.
LabelReport label_edges(CellGraph& graph, const std::set<Relation>& truth);

// Ground-truth adjacency relations of a structure, id-based. Same
// extraction as the evaluation metric.
std::set<Relation> truth_relations_of(const TableStructure& structure);

// knn_edges + features over cells sorted by id.
CellGraph build_graph(std::vector<Cell> cells, int k);

}  // namespace tsr
