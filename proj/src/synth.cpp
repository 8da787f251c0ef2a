#include "tsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "tsr/model.hpp"  // uniform_unit

namespace tsr {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// splitmix64: consecutive table seeds must not produce correlated streams
std::uint64_t scramble_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double jittered(std::mt19937_64& rng, double base, double jitter) {
  return base * (1.0 + jitter * (2.0 * uniform_unit(rng) - 1.0));
}

struct SpanBlock {
  int r, c, dr, dc;  // top-left slot and extent
};

// Rectangular span shapes covering 2..max_slots slots.
std::vector<std::pair<int, int>> span_shapes(int max_slots) {
  std::vector<std::pair<int, int>> shapes;
  for (int dr = 1; dr <= max_slots; ++dr) {
    for (int dc = 1; dc <= max_slots; ++dc) {
      int slots = dr * dc;
      if (slots >= 2 && slots <= max_slots) shapes.emplace_back(dr, dc);
    }
  }
  return shapes;
}

GeneratedTable generate_one(const GenConfig& config, std::uint64_t table_seed) {
  std::mt19937_64 rng(scramble_seed(table_seed));
  const int n_rows = uniform_int(rng, config.min_rows, config.max_rows);
  const int n_cols = uniform_int(rng, config.min_cols, config.max_cols);
  const bool complicated = uniform_unit(rng) < config.complicated_prob;

  // block_of[r][c]: index of the span block covering the slot, -1 if none
  std::vector<std::vector<int>> block_of(n_rows, std::vector<int>(n_cols, -1));
  std::vector<SpanBlock> blocks;
  if (complicated) {
    const auto shapes = span_shapes(config.max_span_slots);
    const int want = uniform_int(rng, config.min_spans, config.max_spans);
    for (int s = 0; s < want; ++s) {
      bool placed = false;
      for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
        auto [dr, dc] = shapes[uniform_int(rng, 0, static_cast<int>(shapes.size()) - 1)];
        if (dr > n_rows || dc > n_cols) continue;
        int r = uniform_int(rng, 0, n_rows - dr);
        int c = uniform_int(rng, 0, n_cols - dc);
        bool free = true;
        for (int rr = r; rr < r + dr && free; ++rr) {
          for (int cc = c; cc < c + dc && free; ++cc) {
            if (block_of[rr][cc] != -1) free = false;
          }
        }
        if (!free) continue;
        int block_id = static_cast<int>(blocks.size());
        blocks.push_back(SpanBlock{r, c, dr, dc});
        for (int rr = r; rr < r + dr; ++rr) {
          for (int cc = c; cc < c + dc; ++cc) block_of[rr][cc] = block_id;
        }
        placed = true;
      }
      if (!placed && s == 0) {
        // guarantee at least one spanning cell: first fitting 1x2 block
        for (int r = 0; r < n_rows && !placed; ++r) {
          for (int c = 0; c + 1 < n_cols && !placed; ++c) {
            if (block_of[r][c] == -1 && block_of[r][c + 1] == -1) {
              blocks.push_back(SpanBlock{r, c, 1, 2});
              block_of[r][c] = block_of[r][c + 1] = 0;
              placed = true;
            }
          }
        }
      }
    }
  }

  // Jittered grid geometry, rows laid out top-down with y growing upward.
  std::vector<double> col_edge(n_cols + 1, 0), row_top(n_rows + 1, 0);
  for (int c = 0; c < n_cols; ++c) {
    col_edge[c + 1] = col_edge[c] + jittered(rng, config.base_col_width, config.col_width_jitter);
  }
  std::vector<double> heights(n_rows);
  double total_height = 0;
  for (int r = 0; r < n_rows; ++r) {
    heights[r] = jittered(rng, config.base_row_height, config.row_height_jitter);
    total_height += heights[r];
  }
  row_top[0] = total_height;
  for (int r = 0; r < n_rows; ++r) row_top[r + 1] = row_top[r] - heights[r];

  auto slot_box = [&](int r1, int r2, int c1, int c2) {
    return BBox{col_edge[c1] + config.padding, col_edge[c2 + 1] - config.padding,
                row_top[r2 + 1] + config.padding, row_top[r1] - config.padding};
  };

  GeneratedTable table;
  table.table_seed = table_seed;
  table.complicated = complicated;
  table.structure.n_rows = n_rows;
  table.structure.n_cols = n_cols;

  std::vector<char> block_emitted(blocks.size(), 0);
  int next_id = 0;
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      int block = block_of[r][c];
      StructuredCell sc;
      if (block >= 0) {
        if (block_emitted[block]) continue;
        const SpanBlock& blk = blocks[block];
        if (blk.r != r || blk.c != c) continue;  // only at the top-left slot
        block_emitted[block] = 1;
        sc.start_row = blk.r;
        sc.end_row = blk.r + blk.dr - 1;
        sc.start_col = blk.c;
        sc.end_col = blk.c + blk.dc - 1;
      } else {
        sc.start_row = sc.end_row = r;
        sc.start_col = sc.end_col = c;
      }
      sc.cell.id = next_id++;
      sc.cell.content = config.duplicate_content ? "v" + std::to_string(sc.cell.id % 5)
                                                 : "c" + std::to_string(sc.cell.id);
      sc.cell.box = slot_box(sc.start_row, sc.end_row, sc.start_col, sc.end_col);
      table.structure.cells.push_back(sc);
      table.chunks.cells.push_back(sc.cell);
    }
  }
  validate(table.structure);
  return table;
}

}  // namespace

std::vector<GeneratedTable> generate(const GenConfig& config, int count) {
  if (config.min_rows < 1 || config.min_rows > config.max_rows || config.min_cols < 1 ||
      config.min_cols > config.max_cols) {
    throw std::invalid_argument("grid size ranges must be non-empty");
  }
  if (config.complicated_prob < 0 || config.complicated_prob > 1) {
    throw std::invalid_argument("complicated_prob must lie in [0, 1]");
  }
  if (config.min_spans < 1 || config.min_spans > config.max_spans || config.max_span_slots < 2) {
    throw std::invalid_argument("span configuration is infeasible");
  }
  std::vector<GeneratedTable> tables;
  tables.reserve(count);
  for (int i = 0; i < count; ++i) {
    tables.push_back(generate_one(config, config.seed + static_cast<std::uint64_t>(i)));
  }
  return tables;
}

PerturbResult perturb(const ChunkFile& chunks, double noise, std::uint64_t seed) {
  if (noise < 0) throw std::invalid_argument("noise bound must be non-negative");
  PerturbResult result;
  result.chunks = chunks;
  if (noise == 0) return result;

  std::mt19937_64 rng(seed);
  auto wiggle = [&](double v) { return v + noise * (2.0 * uniform_unit(rng) - 1.0); };
  for (Cell& cell : result.chunks.cells) {
    BBox& b = cell.box;
    b = BBox{wiggle(b.x1), wiggle(b.x2), wiggle(b.y1), wiggle(b.y2)};
    if (b.x1 > b.x2) std::swap(b.x1, b.x2);
    if (b.y1 > b.y2) std::swap(b.y1, b.y2);
  }

  // Smallest positive gap between the original boxes on either axis; once
  // the noise can bridge half of it, neighboring cells may swap order.
  double min_gap = std::numeric_limits<double>::infinity();
  const auto& cells = chunks.cells;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t j = i + 1; j < cells.size(); ++j) {
      const BBox& a = cells[i].box;
      const BBox& b = cells[j].box;
      double gx = std::max(b.x1 - a.x2, a.x1 - b.x2);
      double gy = std::max(b.y1 - a.y2, a.y1 - b.y2);
      for (double g : {gx, gy}) {
        if (g > 1e-9) min_gap = std::min(min_gap, g);
      }
    }
  }
  result.ambiguity_warning = std::isfinite(min_gap) && noise >= 0.5 * min_gap;
  return result;
}

}  // namespace tsr
