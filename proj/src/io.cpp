#include "tsr/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace tsr {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("parse error in " + path.string() + ": " + e.what());
  }
}

const json& require_field(const json& obj, const char* field, const std::string& context) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw std::runtime_error(context + ": missing field \"" + field + "\"");
  }
  return *it;
}

std::string strip_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (!std::isspace(static_cast<unsigned char>(ch))) out.push_back(ch);
  }
  return out;
}

// Content may be a plain string or an array of token strings.
std::string content_of(const json& value, const std::string& context) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_array()) {
    std::string joined;
    for (const auto& tok : value) {
      if (!tok.is_string()) {
        throw std::runtime_error(context + ": content tokens must be strings");
      }
      if (!joined.empty()) joined += ' ';
      joined += tok.get<std::string>();
    }
    return joined;
  }
  throw std::runtime_error(context + ": content must be a string or string array");
}

size_t lcs_length(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double text_similarity(const std::string& a, const std::string& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  return 2.0 * static_cast<double>(lcs_length(a, b)) /
         static_cast<double>(a.size() + b.size());
}

double box_iou(const BBox& a, const BBox& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  double inter = ix * iy;
  double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Exact assignment maximizing the total score over an n x m matrix with
// n <= m (Hungarian algorithm with potentials). Returns, for each row,
// the assigned column.
std::vector<int> max_score_assignment(const std::vector<std::vector<double>>& score) {
  const int n = static_cast<int>(score.size());
  const int m = static_cast<int>(score[0].size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<int> col_row(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    col_row[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = col_row[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = -score[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[col_row[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_row[j0] != 0);
    do {
      int j1 = way[j0];
      col_row[j0] = col_row[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (col_row[j] > 0) row_col[col_row[j] - 1] = j - 1;
  }
  return row_col;
}

constexpr double kMatchScoreThreshold = 0.3;

}  // namespace

ChunkFile read_chunks(const std::filesystem::path& path) {
  json doc = parse_file(path);
  const std::string context = path.filename().string();
  const json& chunks = require_field(doc, "chunks", context);
  if (!chunks.is_array()) {
    throw std::runtime_error(context + ": \"chunks\" must be an array");
  }
  if (chunks.empty()) {
    throw std::runtime_error(context + ": empty table (no chunks)");
  }
  ChunkFile out;
  out.cells.reserve(chunks.size());
  int id = 0;
  for (const json& entry : chunks) {
    const std::string where = context + ", chunk " + std::to_string(id);
    const json& pos = require_field(entry, "pos", where);
    const json& text = require_field(entry, "text", where);
    if (!pos.is_array() || pos.size() != 4) {
      throw std::runtime_error(where + ": \"pos\" must be [x1, x2, y1, y2]");
    }
    Cell cell;
    cell.id = id++;
    cell.content = text.get<std::string>();
    cell.box = BBox{pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>(),
                    pos[3].get<double>()};
    if (!valid_box(cell.box)) {
      throw std::runtime_error(where + ": invalid box (expects x1 <= x2, y1 <= y2, finite)");
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

void write_chunks(const ChunkFile& chunks, const std::filesystem::path& path) {
  ordered_json doc;
  doc["chunks"] = ordered_json::array();
  for (const Cell& cell : chunks.cells) {
    ordered_json entry;
    entry["pos"] = {cell.box.x1, cell.box.x2, cell.box.y1, cell.box.y2};
    entry["text"] = cell.content;
    doc["chunks"].push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TableStructure read_structure(const std::filesystem::path& path) {
  json doc = parse_file(path);
  const std::string context = path.filename().string();
  const json& cells = require_field(doc, "cells", context);
  if (!cells.is_array() || cells.empty()) {
    throw std::runtime_error(context + ": \"cells\" must be a non-empty array");
  }
  TableStructure structure;
  structure.cells.reserve(cells.size());
  for (const json& entry : cells) {
    StructuredCell sc;
    const std::string where =
        context + ", cell " + std::to_string(structure.cells.size());
    sc.cell.id = require_field(entry, "id", where).get<int>();
    sc.cell.content = content_of(require_field(entry, "content", where), where);
    sc.start_row = require_field(entry, "start_row", where).get<int>();
    sc.end_row = require_field(entry, "end_row", where).get<int>();
    sc.start_col = require_field(entry, "start_col", where).get<int>();
    sc.end_col = require_field(entry, "end_col", where).get<int>();
    if (sc.start_row < 0 || sc.start_col < 0 || sc.start_row > sc.end_row ||
        sc.start_col > sc.end_col) {
      throw std::runtime_error(where + ": negative or inverted span");
    }
    structure.n_rows = std::max(structure.n_rows, sc.end_row + 1);
    structure.n_cols = std::max(structure.n_cols, sc.end_col + 1);
    structure.cells.push_back(std::move(sc));
  }
  std::sort(structure.cells.begin(), structure.cells.end(),
            [](const StructuredCell& a, const StructuredCell& b) {
              return a.cell.id < b.cell.id;
            });
  for (size_t i = 0; i < structure.cells.size(); ++i) {
    if (structure.cells[i].cell.id != static_cast<int>(i)) {
      throw std::runtime_error(context + ": cell ids must be distinct and contiguous from 0");
    }
  }
  validate(structure);
  return structure;
}

void write_structure(const TableStructure& structure, const std::filesystem::path& path) {
  std::vector<const StructuredCell*> ordered;
  ordered.reserve(structure.cells.size());
  for (const StructuredCell& sc : structure.cells) ordered.push_back(&sc);
  std::sort(ordered.begin(), ordered.end(),
            [](const StructuredCell* a, const StructuredCell* b) {
              return a->cell.id < b->cell.id;
            });
  ordered_json doc;
  doc["cells"] = ordered_json::array();
  for (const StructuredCell* sc : ordered) {
    ordered_json entry;
    entry["id"] = sc->cell.id;
    entry["content"] = sc->cell.content;
    entry["start_row"] = sc->start_row;
    entry["end_row"] = sc->end_row;
    entry["start_col"] = sc->start_col;
    entry["end_col"] = sc->end_col;
    doc["cells"].push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CellMatching match_cells(const ChunkFile& chunks, const TableStructure& truth) {
  CellMatching matching;
  const int n = static_cast<int>(chunks.cells.size());
  const int m = static_cast<int>(truth.cells.size());
  if (n == 0 || m == 0) {
    for (int i = 0; i < n; ++i) matching.unmatched_chunks.push_back(i);
    for (int j = 0; j < m; ++j) matching.unmatched_truth.push_back(j);
    return matching;
  }

  std::vector<std::string> chunk_text(n), truth_text(m);
  for (int i = 0; i < n; ++i) chunk_text[i] = strip_whitespace(chunks.cells[i].content);
  for (int j = 0; j < m; ++j) truth_text[j] = strip_whitespace(truth.cells[j].cell.content);

  std::vector<std::vector<double>> score(n, std::vector<double>(m, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      score[i][j] = 0.5 * text_similarity(chunk_text[i], truth_text[j]) +
                    0.5 * box_iou(chunks.cells[i].box, truth.cells[j].cell.box);
    }
  }

  // The assignment solver wants rows <= cols; transpose if needed.
  std::vector<int> chunk_to_truth(n, -1);
  if (n <= m) {
    chunk_to_truth = max_score_assignment(score);
  } else {
    std::vector<std::vector<double>> t(m, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) t[j][i] = score[i][j];
    std::vector<int> truth_to_chunk = max_score_assignment(t);
    for (int j = 0; j < m; ++j) {
      if (truth_to_chunk[j] >= 0) chunk_to_truth[truth_to_chunk[j]] = j;
    }
  }

  std::vector<char> truth_used(m, 0);
  for (int i = 0; i < n; ++i) {
    int j = chunk_to_truth[i];
    if (j >= 0 && score[i][j] >= kMatchScoreThreshold) {
      matching.pairs.emplace_back(i, j);
      truth_used[j] = 1;
    } else {
      matching.unmatched_chunks.push_back(i);
    }
  }
  for (int j = 0; j < m; ++j) {
    if (!truth_used[j]) matching.unmatched_truth.push_back(j);
  }
  return matching;
}

}  // namespace tsr
