#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "tsr/types.hpp"

namespace tsr {

// Raw extracted cells: one entry per text chunk, ids in file order.
struct ChunkFile {
  std::vector<Cell> cells;
};

// Chunk file schema: {"chunks": [{"pos": [x1, x2, y1, y2], "text": "..."}]}
// with pos in PDF points, y growing upward. Throws std::runtime_error on
// parse errors (message carries the byte offset), missing fields, invalid
// boxes or an empty chunk list.
ChunkFile read_chunks(const std::filesystem::path& path);

void write_chunks(const ChunkFile& chunks, const std::filesystem::path& path);

// Structure file schema:
//   {"cells": [{"id": int, "content": "...", "start_row": int, "end_row":
//   int, "start_col": int, "end_col": int}, ...]}
// Cell contents may also arrive as an array of token strings (some
// published datasets store them that way); tokens are joined with single
// spaces. Grid dimensions are derived as 1 + max end indices, and all
// structure invariants are validated before returning.
TableStructure read_structure(const std::filesystem::path& path);

// Canonical writer: cells sorted by id, fields in fixed order. Writing
// the same structure twice produces identical bytes, and read_structure
// round-trips the value exactly.
void write_structure(const TableStructure& structure, const std::filesystem::path& path);

// One-to-one alignment between extracted chunks and ground-truth cells.
struct CellMatching {
  std::vector<std::pair<int, int>> pairs;  // (chunk index, truth cell index)
  std::vector<int> unmatched_chunks;
  std::vector<int> unmatched_truth;
};

// Maximum-score assignment between chunks and ground-truth cells, with
// pair score = 0.5 * text similarity + 0.5 * box IoU. Text similarity is
// the longest-common-subsequence ratio on whitespace-stripped content.
// Pairs scoring below 0.3 are dropped. Degenerate (empty) inputs yield an
// empty matching.
CellMatching match_cells(const ChunkFile& chunks, const TableStructure& truth);

}  // namespace tsr
