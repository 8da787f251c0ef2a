#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "tsr/io.hpp"

using namespace tsr;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& body) {
  fs::path path = fs::temp_directory_path() / ("tsr_test_" + name);
  std::ofstream out(path);
  out << body;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("read_chunks single chunk") {
  fs::path p = temp_file("single.chunk.json",
                         R"({"chunks": [{"pos": [0, 10, 0, 5], "text": "A"}]})");
  ChunkFile chunks = read_chunks(p);
  REQUIRE(chunks.cells.size() == 1);
  CHECK(chunks.cells[0].id == 0);
  CHECK(chunks.cells[0].content == "A");
  CHECK(chunks.cells[0].box == BBox{0, 10, 0, 5});
}

TEST_CASE("read_chunks realistic table size") {
  std::ostringstream body;
  body << R"({"chunks": [)";
  for (int i = 0; i < 48; ++i) {
    if (i) body << ",";
    body << R"({"pos": [)" << (i % 6) * 20 << "," << (i % 6) * 20 + 18 << ","
         << (i / 6) * 12 << "," << (i / 6) * 12 + 10 << R"(], "text": "c)" << i << R"("})";
  }
  body << "]}";
  ChunkFile chunks = read_chunks(temp_file("avg.chunk.json", body.str()));
  CHECK(chunks.cells.size() == 48);
  for (size_t i = 0; i < chunks.cells.size(); ++i) {
    CHECK(chunks.cells[i].id == (int)i);
  }
}

TEST_CASE("read_chunks error paths") {
  CHECK_THROWS_WITH_AS(read_chunks(temp_file("broken.chunk.json", R"({"chunks": [{"pos")")),
                       doctest::Contains("parse error"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      read_chunks(temp_file("nofield.chunk.json", R"({"chunks": [{"text": "A"}]})")),
      doctest::Contains("pos"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_chunks(temp_file("empty.chunk.json", R"({"chunks": []})")),
                       doctest::Contains("empty"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      read_chunks(temp_file("inverted.chunk.json",
                            R"({"chunks": [{"pos": [10, 0, 0, 5], "text": "A"}]})")),
      doctest::Contains("invalid box"), std::runtime_error);
  CHECK_THROWS(read_chunks(fs::temp_directory_path() / "tsr_does_not_exist.json"));
}

TEST_CASE("read_structure single cell") {
  fs::path p = temp_file("single.structure.json", R"({"cells": [
    {"id": 0, "content": "A", "start_row": 0, "end_row": 0, "start_col": 0, "end_col": 0}
  ]})");
  TableStructure s = read_structure(p);
  CHECK(s.n_rows == 1);
  CHECK(s.n_cols == 1);
  REQUIRE(s.cells.size() == 1);
  CHECK_FALSE(s.cells[0].spanning());
}

TEST_CASE("read_structure marks spanning cells") {
  fs::path p = temp_file("span.structure.json", R"({"cells": [
    {"id": 0, "content": "S", "start_row": 0, "end_row": 0, "start_col": 0, "end_col": 1},
    {"id": 1, "content": "X", "start_row": 1, "end_row": 1, "start_col": 0, "end_col": 0},
    {"id": 2, "content": "Y", "start_row": 1, "end_row": 1, "start_col": 1, "end_col": 1}
  ]})");
  TableStructure s = read_structure(p);
  CHECK(s.cells[0].spanning());
  CHECK_FALSE(s.cells[1].spanning());
}

TEST_CASE("read_structure accepts token-array content") {
  // published datasets store content as a token list
  fs::path p = temp_file("tokens.structure.json", R"({"cells": [
    {"id": 0, "content": ["two", "words"], "tex": "ignored",
     "start_row": 0, "end_row": 0, "start_col": 0, "end_col": 0}
  ]})");
  TableStructure s = read_structure(p);
  CHECK(s.cells[0].cell.content == "two words");
}

TEST_CASE("read_structure error paths") {
  CHECK_THROWS_WITH_AS(read_structure(temp_file("overlap.structure.json", R"({"cells": [
    {"id": 0, "content": "A", "start_row": 0, "end_row": 1, "start_col": 0, "end_col": 0},
    {"id": 1, "content": "B", "start_row": 1, "end_row": 1, "start_col": 0, "end_col": 1}
  ]})")),
                       doctest::Contains("overlap"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_structure(temp_file("inverted.structure.json", R"({"cells": [
    {"id": 0, "content": "A", "start_row": 1, "end_row": 0, "start_col": 0, "end_col": 0}
  ]})")),
                       doctest::Contains("inverted"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_structure(temp_file("badids.structure.json", R"({"cells": [
    {"id": 0, "content": "A", "start_row": 0, "end_row": 0, "start_col": 0, "end_col": 0},
    {"id": 2, "content": "B", "start_row": 0, "end_row": 0, "start_col": 1, "end_col": 1}
  ]})")),
                       doctest::Contains("contiguous"), std::runtime_error);
}

TEST_CASE("structure writer round-trips and is canonical") {
  std::mt19937_64 rng(23);
  fs::path p = fs::temp_directory_path() / "tsr_test_roundtrip.structure.json";
  for (int trial = 0; trial < 200; ++trial) {
    TableStructure s = oracle::random_structure(rng);
    write_structure(s, p);
    TableStructure back = read_structure(p);
    CHECK(back.n_rows == s.n_rows);
    CHECK(back.n_cols == s.n_cols);
    REQUIRE(back.cells.size() == s.cells.size());
    for (size_t i = 0; i < s.cells.size(); ++i) {
      CHECK(back.cells[i].cell.id == s.cells[i].cell.id);
      CHECK(back.cells[i].cell.content == s.cells[i].cell.content);
      CHECK(back.cells[i].start_row == s.cells[i].start_row);
      CHECK(back.cells[i].end_row == s.cells[i].end_row);
      CHECK(back.cells[i].start_col == s.cells[i].start_col);
      CHECK(back.cells[i].end_col == s.cells[i].end_col);
    }
    // identical bytes on rewrite
    std::string first = slurp(p);
    write_structure(back, p);
    CHECK(first == slurp(p));
  }
}

TEST_CASE("chunk writer round-trips") {
  std::mt19937_64 rng(29);
  fs::path p = fs::temp_directory_path() / "tsr_test_roundtrip.chunk.json";
  ChunkFile chunks;
  chunks.cells = oracle::random_layout(rng, 12);
  write_chunks(chunks, p);
  ChunkFile back = read_chunks(p);
  REQUIRE(back.cells.size() == chunks.cells.size());
  for (size_t i = 0; i < chunks.cells.size(); ++i) {
    CHECK(back.cells[i].content == chunks.cells[i].content);
    CHECK(back.cells[i].box == chunks.cells[i].box);
  }
}

namespace {

// chunks colocated with a simple grid structure, used by matching tests
struct MatchFixture {
  ChunkFile chunks;
  TableStructure truth;
};

MatchFixture grid_fixture(int rows, int cols) {
  MatchFixture f;
  f.truth.n_rows = rows;
  f.truth.n_cols = cols;
  int id = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      StructuredCell sc;
      sc.cell.id = id;
      sc.cell.content = "cell " + std::to_string(id);
      sc.cell.box = BBox{c * 30.0, c * 30.0 + 26.0, r * -12.0, r * -12.0 + 10.0};
      sc.start_row = sc.end_row = r;
      sc.start_col = sc.end_col = c;
      f.truth.cells.push_back(sc);
      f.chunks.cells.push_back(sc.cell);
      ++id;
    }
  }
  return f;
}

}  // namespace

TEST_CASE("match_cells identity on equal inputs") {
  MatchFixture f = grid_fixture(3, 4);
  CellMatching m = match_cells(f.chunks, f.truth);
  REQUIRE(m.pairs.size() == 12);
  CHECK(m.unmatched_chunks.empty());
  CHECK(m.unmatched_truth.empty());
  for (auto [ci, ti] : m.pairs) CHECK(ci == ti);
}

TEST_CASE("match_cells drops sub-threshold noise chunks") {
  MatchFixture f = grid_fixture(2, 2);
  Cell noise;
  noise.id = 4;
  noise.content = "";
  noise.box = BBox{500, 501, 500, 501};  // far away, empty text
  f.chunks.cells.push_back(noise);
  CellMatching m = match_cells(f.chunks, f.truth);
  CHECK(m.pairs.size() == 4);
  REQUIRE(m.unmatched_chunks.size() == 1);
  CHECK(m.unmatched_chunks[0] == 4);
  CHECK(m.unmatched_truth.empty());
  for (auto [ci, ti] : m.pairs) CHECK(ci == ti);
}

TEST_CASE("match_cells equals brute-force assignment at n=10") {
  std::mt19937_64 rng(31);
  MatchFixture f = grid_fixture(2, 5);
  // perturb chunk boxes by up to 2pt, keep text exact
  for (Cell& cell : f.chunks.cells) {
    cell.box.x1 += 4 * oracle::unit(rng) - 2;
    cell.box.x2 += 4 * oracle::unit(rng) - 2;
    cell.box.y1 += 4 * oracle::unit(rng) - 2;
    cell.box.y2 += 4 * oracle::unit(rng) - 2;
    if (cell.box.x1 > cell.box.x2) std::swap(cell.box.x1, cell.box.x2);
    if (cell.box.y1 > cell.box.y2) std::swap(cell.box.y1, cell.box.y2);
  }
  CellMatching m = match_cells(f.chunks, f.truth);
  REQUIRE(m.pairs.size() == 10);
  for (auto [ci, ti] : m.pairs) CHECK(ci == ti);

  // independent reimplementation of the documented pair score
  auto lcs = [](const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i) {
      for (size_t j = 1; j <= b.size(); ++j) {
        dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                        : std::max(dp[i - 1][j], dp[i][j - 1]);
      }
    }
    return dp[a.size()][b.size()];
  };
  auto strip = [](std::string s) {
    std::erase_if(s, [](unsigned char ch) { return std::isspace(ch); });
    return s;
  };
  auto score = [&](int i, int j) {
    std::string a = strip(f.chunks.cells[i].content);
    std::string b = strip(f.truth.cells[j].cell.content);
    double text = (a.empty() && b.empty())
                      ? 1.0
                      : 2.0 * lcs(a, b) / static_cast<double>(a.size() + b.size());
    const BBox& ba = f.chunks.cells[i].box;
    const BBox& bb = f.truth.cells[j].cell.box;
    double ix = std::min(ba.x2, bb.x2) - std::max(ba.x1, bb.x1);
    double iy = std::min(ba.y2, bb.y2) - std::max(ba.y1, bb.y1);
    double inter = (ix > 0 && iy > 0) ? ix * iy : 0.0;
    double uni =
        (ba.x2 - ba.x1) * (ba.y2 - ba.y1) + (bb.x2 - bb.x1) * (bb.y2 - bb.y1) - inter;
    return 0.5 * text + 0.5 * (uni > 0 ? inter / uni : 0.0);
  };

  // brute force over all 10! assignments: identity must be optimal, and
  // match_cells found it
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1;
  std::vector<int> best_perm;
  do {
    double total = 0;
    for (int i = 0; i < 10; ++i) total += score(i, perm[i]);
    if (total > best) {
      best = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (int i = 0; i < 10; ++i) CHECK(best_perm[i] == i);
}

TEST_CASE("match_cells is symmetric under input swap") {
  std::mt19937_64 rng(37);
  MatchFixture f = grid_fixture(3, 3);
  for (Cell& cell : f.chunks.cells) {
    cell.box.x1 += oracle::unit(rng) - 0.5;
    cell.box.x2 += oracle::unit(rng) - 0.5;
  }
  // swap: present chunks as truth and truth as chunks
  TableStructure chunk_structure;
  chunk_structure.n_rows = 1;
  chunk_structure.n_cols = (int)f.chunks.cells.size();
  for (int i = 0; i < (int)f.chunks.cells.size(); ++i) {
    StructuredCell sc;
    sc.cell = f.chunks.cells[i];
    sc.start_row = sc.end_row = 0;
    sc.start_col = sc.end_col = i;
    chunk_structure.cells.push_back(sc);
  }
  ChunkFile truth_chunks;
  for (const StructuredCell& sc : f.truth.cells) truth_chunks.cells.push_back(sc.cell);

  CellMatching forward = match_cells(f.chunks, f.truth);
  CellMatching swapped = match_cells(truth_chunks, chunk_structure);
  std::vector<std::pair<int, int>> transposed;
  for (auto [a, b] : swapped.pairs) transposed.emplace_back(b, a);
  std::sort(transposed.begin(), transposed.end());
  CHECK(forward.pairs == transposed);
}

TEST_CASE("match_cells on empty inputs") {
  ChunkFile empty;
  MatchFixture f = grid_fixture(2, 2);
  CellMatching m = match_cells(empty, f.truth);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched_truth.size() == 4);
}
