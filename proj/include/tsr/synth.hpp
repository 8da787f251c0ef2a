#pragma once

#include <cstdint>
#include <vector>

#include "tsr/io.hpp"
#include "tsr/types.hpp"

namespace tsr {

// Generator knobs. Grid size ranges are inclusive and calibrated so that
// the defaults land near real-world table statistics (about 9 rows, 5
// columns, a quarter of the tables containing spanning cells).
struct GenConfig {
  std::uint64_t seed{0};
  int min_rows{3}, max_rows{15};
  int min_cols{2}, max_cols{8};
  double complicated_prob{0.24};      // chance a table gets spanning cells
  int min_spans{1}, max_spans{3};     // spanning cells per complicated table
  int max_span_slots{4};              // slots a single spanning cell may cover
  double base_col_width{55.0};        // pt
  double base_row_height{14.0};       // pt
  double col_width_jitter{0.35};      // relative, per column
  double row_height_jitter{0.25};     // relative, per row
  double padding{1.5};                // pt shaved from every slot edge
  bool duplicate_content{false};      // stress mode: repeated cell texts
};

struct GeneratedTable {
  ChunkFile chunks;
  TableStructure structure;
  bool complicated{false};
  std::uint64_t table_seed{0};
};

// Deterministic given the config: table i uses seed config.seed + i, so
// generation can be partitioned freely. Every emitted structure satisfies
// all TableStructure invariants and covers every grid slot.
std::vector<GeneratedTable> generate(const GenConfig& config, int count);

struct PerturbResult {
  ChunkFile chunks;
  // set when the noise bound reaches half the smallest gap between cell
  // boxes, i.e. when labels may become geometrically ambiguous
  bool ambiguity_warning{false};
};

// Adds uniform noise in [-noise, +noise] to every box coordinate,
// re-ordering degenerate results so boxes stay valid. Text unchanged.
PerturbResult perturb(const ChunkFile& chunks, double noise, std::uint64_t seed);

}  // namespace tsr
