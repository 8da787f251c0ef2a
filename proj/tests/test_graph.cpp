#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "tsr/graph.hpp"

using namespace tsr;

namespace {

Cell box_cell(int id, double x1, double x2, double y1, double y2) {
  Cell c;
  c.id = id;
  c.content = "c" + std::to_string(id);
  c.box = BBox{x1, x2, y1, y2};
  return c;
}

}  // namespace

TEST_CASE("knn_edges trivial sizes") {
  CHECK(knn_edges({box_cell(0, 0, 1, 0, 1)}, 20).empty());
  auto edges = knn_edges({box_cell(0, 0, 1, 0, 1), box_cell(1, 5, 6, 0, 1)}, 1);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0] == std::pair{0, 1});
}

TEST_CASE("knn_edges complete graph fallback") {
  std::mt19937_64 rng(2);
  auto cells = oracle::random_layout(rng, 6);
  auto edges = knn_edges(cells, 20);
  CHECK(edges.size() == 15);  // 6 choose 2
}

TEST_CASE("knn_edges on a 3x4 unit grid with k=3 matches brute force") {
  std::vector<Cell> cells;
  int id = 0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      cells.push_back(box_cell(id++, c, c + 0.5, r, r + 0.5));
    }
  }
  auto edges = knn_edges(cells, 3);
  auto expect = oracle::knn_oracle(cells, 3);
  CHECK(std::set<std::pair<int, int>>(edges.begin(), edges.end()) == expect);
}

TEST_CASE("knn_edges equals brute force on random layouts") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    int n = oracle::rand_int(rng, 2, 40);
    auto cells = oracle::random_layout(rng, n);
    for (int k : {1, 3, 20}) {
      auto edges = knn_edges(cells, k);
      auto expect = oracle::knn_oracle(cells, k);
      CHECK(std::set<std::pair<int, int>>(edges.begin(), edges.end()) == expect);
      CHECK(edges.size() <= static_cast<size_t>(k) * n);
    }
  }
}

TEST_CASE("knn_edges ignores list order") {
  std::mt19937_64 rng(23);
  auto cells = oracle::random_layout(rng, 25);
  auto edges = knn_edges(cells, 4);
  std::shuffle(cells.begin(), cells.end(), rng);
  CHECK(knn_edges(cells, 4) == edges);
}

TEST_CASE("vertex features of a cell filling the table box") {
  std::vector<Cell> cells = {box_cell(0, 0, 20, 0, 10)};
  Eigen::MatrixXd f = vertex_features(cells, table_box_of(cells));
  CHECK(f(0, 2) == doctest::Approx(1.0));
  CHECK(f(0, 3) == doctest::Approx(1.0));
  CHECK(f(0, 6) == doctest::Approx(0.5));
  CHECK(f(0, 7) == doctest::Approx(0.5));
}

TEST_CASE("vertex features hand case") {
  std::vector<Cell> cells = {box_cell(0, 0, 10, 0, 5), box_cell(1, 0, 20, 0, 10)};
  BBox tb = table_box_of(cells);
  CHECK(tb == BBox{0, 20, 0, 10});
  Eigen::MatrixXd f = vertex_features(cells, tb);
  CHECK(f(0, 0) == doctest::Approx(10.0));   // abs width
  CHECK(f(0, 1) == doctest::Approx(5.0));    // abs height
  CHECK(f(0, 2) == doctest::Approx(0.5));    // rel width
  CHECK(f(0, 3) == doctest::Approx(0.5));    // rel height
  CHECK(f(0, 4) == doctest::Approx(5.0));    // abs center x
  CHECK(f(0, 5) == doctest::Approx(2.5));    // abs center y
  CHECK(f(0, 6) == doctest::Approx(0.25));   // rel center x
  CHECK(f(0, 7) == doctest::Approx(0.25));   // rel center y
}

TEST_CASE("vertex features match a straight-line reimplementation") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto cells = oracle::random_layout(rng, oracle::rand_int(rng, 1, 30));
    BBox tb = table_box_of(cells);
    Eigen::MatrixXd f = vertex_features(cells, tb);
    double tw = tb.x2 - tb.x1, th = tb.y2 - tb.y1;
    for (size_t i = 0; i < cells.size(); ++i) {
      const BBox& b = cells[i].box;
      double w = b.x2 - b.x1, h = b.y2 - b.y1;
      double cx = 0.5 * (b.x1 + b.x2), cy = 0.5 * (b.y1 + b.y2);
      double expect[8] = {w,  h,  w / tw, h / th,
                          cx, cy, (cx - tb.x1) / tw, (cy - tb.y1) / th};
      for (int j = 0; j < 8; ++j) {
        CHECK(f(i, j) == doctest::Approx(expect[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("vertex features reject a degenerate table box") {
  std::vector<Cell> cells = {box_cell(0, 0, 0, 0, 10)};  // zero width
  CHECK_THROWS_WITH_AS(vertex_features(cells, table_box_of(cells)),
                       doctest::Contains("degenerate"), std::runtime_error);
}

TEST_CASE("edge features identical boxes") {
  std::vector<Cell> cells = {box_cell(0, 0, 4, 0, 3), box_cell(1, 0, 4, 0, 3),
                             box_cell(2, 10, 14, 5, 8)};
  Eigen::MatrixXd f = edge_features(cells, {{0, 1}}, table_box_of(cells));
  CHECK(f(0, 0) == doctest::Approx(0.0));
  CHECK(f(0, 6) == doctest::Approx(1.0));
  CHECK(f(0, 7) == doctest::Approx(1.0));
}

TEST_CASE("edge features overlap ratio and 3-4-5 distances") {
  // x ranges [0,4] and [2,8]: intersection 2, smaller extent 4
  std::vector<Cell> a = {box_cell(0, 0, 4, 0, 1), box_cell(1, 2, 8, 10, 11)};
  Eigen::MatrixXd f = edge_features(a, {{0, 1}}, table_box_of(a));
  CHECK(f(0, 6) == doctest::Approx(0.5));

  // centers (0,0) and (3,4)
  std::vector<Cell> b = {box_cell(0, -1, 1, -1, 1), box_cell(1, 2, 4, 3, 5)};
  Eigen::MatrixXd g = edge_features(b, {{0, 1}}, table_box_of(b));
  CHECK(g(0, 0) == doctest::Approx(5.0));
  CHECK(g(0, 1) == doctest::Approx(3.0));
  CHECK(g(0, 2) == doctest::Approx(4.0));
}

TEST_CASE("edge features are symmetric in endpoint order") {
  std::mt19937_64 rng(41);
  auto cells = oracle::random_layout(rng, 10);
  BBox tb = table_box_of(cells);
  Eigen::MatrixXd fwd = edge_features(cells, {{2, 7}}, tb);
  // flipped pair is not canonical, but features must not care
  Eigen::MatrixXd rev = edge_features(cells, {{7, 2}}, tb);
  CHECK((fwd - rev).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("relative features stay in bounds") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    auto cells = oracle::random_layout(rng, 20);
    auto graph = build_graph(cells, 5);
    CHECK(graph.vertex_features.allFinite());
    CHECK(graph.edge_features.allFinite());
    for (long i = 0; i < graph.vertex_features.rows(); ++i) {
      for (int j : {2, 3, 6, 7}) {
        CHECK(graph.vertex_features(i, j) >= 0.0);
        CHECK(graph.vertex_features(i, j) <= 1.0);
      }
    }
    for (long e = 0; e < graph.edge_features.rows(); ++e) {
      for (int j : {6, 7}) {
        CHECK(graph.edge_features(e, j) >= 0.0);
        CHECK(graph.edge_features(e, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("label_edges with empty truth") {
  std::mt19937_64 rng(47);
  CellGraph graph = build_graph(oracle::random_layout(rng, 8), 3);
  LabelReport report = label_edges(graph, {});
  CHECK(report.coverage == 1.0);
  for (RelationLabel label : graph.labels) CHECK(label == RelationLabel::NoRelation);
}

TEST_CASE("label_edges on a 2x2 complete graph") {
  std::vector<Cell> cells = {box_cell(0, 0, 10, 12, 20), box_cell(1, 12, 22, 12, 20),
                             box_cell(2, 0, 10, 0, 8), box_cell(3, 12, 22, 0, 8)};
  CellGraph graph = build_graph(cells, 20);
  REQUIRE(graph.edges.size() == 6);
  std::set<Relation> truth = {canonical_relation(0, 1, RelationLabel::Horizontal),
                              canonical_relation(2, 3, RelationLabel::Horizontal),
                              canonical_relation(0, 2, RelationLabel::Vertical),
                              canonical_relation(1, 3, RelationLabel::Vertical)};
  LabelReport report = label_edges(graph, truth);
  CHECK(report.coverage == 1.0);
  CHECK(report.covered == 4);
  int no_rel = 0;
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    auto it = truth.find(Relation{graph.edges[e].first, graph.edges[e].second,
                                  graph.labels[e]});
    if (graph.labels[e] == RelationLabel::NoRelation) {
      ++no_rel;
      // diagonals only
      CHECK(((graph.edges[e] == std::pair{0, 3}) || (graph.edges[e] == std::pair{1, 2})));
    } else {
      CHECK(it != truth.end());
    }
  }
  CHECK(no_rel == 2);
}

TEST_CASE("label_edges rejects unknown ids") {
  std::mt19937_64 rng(53);
  CellGraph graph = build_graph(oracle::random_layout(rng, 4), 2);
  std::set<Relation> truth = {canonical_relation(0, 9, RelationLabel::Vertical)};
  CHECK_THROWS_WITH_AS(label_edges(graph, truth), doctest::Contains("unknown"),
                       std::runtime_error);
}

TEST_CASE("label_edges never invents a relation") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    TableStructure s = oracle::random_structure(rng, {.min_rows = 2, .max_rows = 5,
                                                      .min_cols = 2, .max_cols = 5,
                                                      .allow_spans = true,
                                                      .blank_prob = 0.0});
    std::vector<Cell> cells;
    for (const StructuredCell& sc : s.cells) cells.push_back(sc.cell);
    if (cells.size() < 2) continue;
    CellGraph graph = build_graph(cells, 3);
    std::set<Relation> truth = truth_relations_of(s);
    label_edges(graph, truth);
    for (size_t e = 0; e < graph.edges.size(); ++e) {
      if (graph.labels[e] != RelationLabel::NoRelation) {
        CHECK(truth.count(Relation{graph.edges[e].first, graph.edges[e].second,
                                   graph.labels[e]}) == 1);
      }
    }
  }
}

TEST_CASE("knn graphs cover nearly all truth relations at k=20") {
  // 9x5 grids mirror the typical table shape; coverage justifies k
  std::mt19937_64 rng(61);
  long covered = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    TableStructure s = oracle::random_structure(rng, {.min_rows = 9, .max_rows = 9,
                                                      .min_cols = 5, .max_cols = 5,
                                                      .allow_spans = true,
                                                      .blank_prob = 0.0});
    std::vector<Cell> cells;
    for (const StructuredCell& sc : s.cells) cells.push_back(sc.cell);
    CellGraph graph = build_graph(cells, 20);
    LabelReport report = label_edges(graph, truth_relations_of(s));
    covered += report.covered;
    total += report.truth_total;
  }
  CHECK(static_cast<double>(covered) / static_cast<double>(total) >= 0.99);
}
