#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "tsr/graph.hpp"
#include "tsr/metrics.hpp"
#include "tsr/synth.hpp"

using namespace tsr;
namespace fs = std::filesystem;

TEST_CASE("generation is deterministic per seed") {
  GenConfig cfg;
  cfg.seed = 5;
  auto a = generate(cfg, 5);
  auto b = generate(cfg, 5);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].structure == b[i].structure);
    CHECK(a[i].chunks.cells == b[i].chunks.cells);
    CHECK(a[i].complicated == b[i].complicated);
  }
  // and each table only depends on seed + index
  GenConfig shifted = cfg;
  shifted.seed = 7;
  auto c = generate(shifted, 3);
  CHECK(c[0].structure == generate(GenConfig{.seed = 7}, 1)[0].structure);
}

TEST_CASE("complicated probability envelope") {
  GenConfig none;
  none.seed = 11;
  none.complicated_prob = 0.0;
  for (const GeneratedTable& t : generate(none, 30)) {
    CHECK_FALSE(t.complicated);
    for (const StructuredCell& sc : t.structure.cells) CHECK_FALSE(sc.spanning());
  }
  GenConfig all;
  all.seed = 13;
  all.complicated_prob = 1.0;
  for (const GeneratedTable& t : generate(all, 30)) {
    CHECK(t.complicated);
    bool any = false;
    for (const StructuredCell& sc : t.structure.cells) any |= sc.spanning();
    CHECK(any);
  }
}

TEST_CASE("defaults are calibrated to realistic table statistics") {
  GenConfig cfg;
  cfg.seed = 17;
  auto tables = generate(cfg, 10000);
  double rows = 0, complicated = 0;
  for (const GeneratedTable& t : tables) {
    rows += t.structure.n_rows;
    complicated += t.complicated;
  }
  CHECK(std::abs(rows / 10000 - 9.29) <= 1.0);
  CHECK(std::abs(complicated / 10000 - 0.24) <= 0.02);
}

TEST_CASE("generated structures are valid and ingest round-trips them") {
  GenConfig cfg;
  cfg.seed = 19;
  auto tables = generate(cfg, 50);
  fs::path sp = fs::temp_directory_path() / "tsr_synth_rt.structure.json";
  fs::path cp = fs::temp_directory_path() / "tsr_synth_rt.chunk.json";
  for (const GeneratedTable& t : tables) {
    CHECK_NOTHROW(validate(t.structure));
    write_structure(t.structure, sp);
    // structure files carry logical content only, not boxes
    TableStructure back = read_structure(sp);
    CHECK(back.n_rows == t.structure.n_rows);
    CHECK(back.n_cols == t.structure.n_cols);
    REQUIRE(back.cells.size() == t.structure.cells.size());
    for (size_t i = 0; i < back.cells.size(); ++i) {
      CHECK(back.cells[i].cell.id == t.structure.cells[i].cell.id);
      CHECK(back.cells[i].cell.content == t.structure.cells[i].cell.content);
      CHECK(back.cells[i].start_row == t.structure.cells[i].start_row);
      CHECK(back.cells[i].end_row == t.structure.cells[i].end_row);
      CHECK(back.cells[i].start_col == t.structure.cells[i].start_col);
      CHECK(back.cells[i].end_col == t.structure.cells[i].end_col);
    }
    write_chunks(t.chunks, cp);
    CHECK(read_chunks(cp).cells == t.chunks.cells);
  }
}

TEST_CASE("truth relations agree with the geometry") {
  GenConfig cfg;
  cfg.seed = 23;
  for (const GeneratedTable& t : generate(cfg, 50)) {
    std::set<Relation> rels = adjacency_relations(t.structure);
    for (const Relation& rel : rels) {
      const BBox& a = t.structure.cells[rel.a].cell.box;
      const BBox& b = t.structure.cells[rel.b].cell.box;
      if (rel.label == RelationLabel::Horizontal) {
        CHECK(std::min(a.y2, b.y2) - std::max(a.y1, b.y1) > 0);
      } else {
        CHECK(std::min(a.x2, b.x2) - std::max(a.x1, b.x1) > 0);
      }
    }
  }
}

TEST_CASE("duplicate-content mode reuses tokens") {
  GenConfig cfg;
  cfg.seed = 29;
  cfg.duplicate_content = true;
  GeneratedTable t = generate(cfg, 1)[0];
  for (const Cell& c : t.chunks.cells) {
    CHECK(c.content.size() == 2);
    CHECK(c.content[0] == 'v');
  }
}

TEST_CASE("perturb basics") {
  GenConfig cfg;
  cfg.seed = 31;
  GeneratedTable t = generate(cfg, 1)[0];

  SUBCASE("zero noise is the identity") {
    PerturbResult r = perturb(t.chunks, 0.0, 99);
    CHECK(r.chunks.cells == t.chunks.cells);
    CHECK_FALSE(r.ambiguity_warning);
  }
  SUBCASE("noise stays within the bound and keeps boxes valid") {
    PerturbResult r = perturb(t.chunks, 1.0, 99);
    REQUIRE(r.chunks.cells.size() == t.chunks.cells.size());
    for (size_t i = 0; i < r.chunks.cells.size(); ++i) {
      const BBox& a = t.chunks.cells[i].box;
      const BBox& b = r.chunks.cells[i].box;
      CHECK(valid_box(b));
      // coordinates moved by at most the bound (plus a possible swap of
      // two coordinates that were within 2*noise of each other)
      CHECK(std::abs(b.x1 - a.x1) <= 2.0 + 1e-12);
      CHECK(std::abs(b.y2 - a.y2) <= 2.0 + 1e-12);
      CHECK(r.chunks.cells[i].content == t.chunks.cells[i].content);
    }
  }
  SUBCASE("large noise sets the ambiguity warning") {
    // padding 1.5 on both sides leaves 3pt gaps; half of that is 1.5
    CHECK_FALSE(perturb(t.chunks, 1.0, 1).ambiguity_warning);
    CHECK(perturb(t.chunks, 40.0, 1).ambiguity_warning);
  }
}
