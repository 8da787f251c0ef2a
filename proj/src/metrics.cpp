#include "tsr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace tsr {

namespace {

std::string strip_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (!std::isspace(static_cast<unsigned char>(ch))) out.push_back(ch);
  }
  return out;
}

// Scans one grid line (a row or a column) and appends a relation for each
// consecutive pair of distinct cells, skipping blanks and repeats of the
// same spanning cell.
template <typename SlotAt, typename Emit>
void scan_line(int length, SlotAt slot_at, Emit emit) {
  int prev = -1;
  for (int i = 0; i < length; ++i) {
    const std::optional<int>& slot = slot_at(i);
    if (!slot.has_value()) continue;
    if (*slot == prev) continue;
    if (prev >= 0) emit(prev, *slot);
    prev = *slot;
  }
}

}  // namespace

std::set<Relation> adjacency_relations(const TableStructure& structure) {
  Grid grid = grid_of(structure);
  std::set<Relation> out;
  for (int r = 0; r < grid.rows; ++r) {
    scan_line(grid.cols, [&](int c) -> const std::optional<int>& { return grid.at(r, c); },
              [&](int a, int b) { out.insert(canonical_relation(a, b, RelationLabel::Horizontal)); });
  }
  for (int c = 0; c < grid.cols; ++c) {
    scan_line(grid.rows, [&](int r) -> const std::optional<int>& { return grid.at(r, c); },
              [&](int a, int b) { out.insert(canonical_relation(a, b, RelationLabel::Vertical)); });
  }
  return out;
}

std::vector<ContentRelation> relations_from_structure(const TableStructure& structure) {
  Grid grid = grid_of(structure);
  std::unordered_map<int, const StructuredCell*> by_id;
  for (const StructuredCell& sc : structure.cells) by_id[sc.cell.id] = &sc;

  std::vector<ContentRelation> out;
  std::set<std::tuple<int, int, RelationLabel>> seen;
  auto emit = [&](int a, int b, RelationLabel label) {
    if (!seen.insert({std::min(a, b), std::max(a, b), label}).second) return;
    const StructuredCell& ca = *by_id.at(a);
    const StructuredCell& cb = *by_id.at(b);
    out.push_back(ContentRelation{strip_whitespace(ca.cell.content),
                                  strip_whitespace(cb.cell.content), label,
                                  ca.spanning() || cb.spanning()});
  };
  for (int r = 0; r < grid.rows; ++r) {
    scan_line(grid.cols, [&](int c) -> const std::optional<int>& { return grid.at(r, c); },
              [&](int a, int b) { emit(a, b, RelationLabel::Horizontal); });
  }
  for (int c = 0; c < grid.cols; ++c) {
    scan_line(grid.rows, [&](int r) -> const std::optional<int>& { return grid.at(r, c); },
              [&](int a, int b) { emit(a, b, RelationLabel::Vertical); });
  }
  return out;
}

std::vector<ContentRelation> filter_relations(const std::vector<ContentRelation>& relations,
                                              const RelationFilter& filter) {
  std::vector<ContentRelation> out;
  out.reserve(relations.size());
  for (const ContentRelation& rel : relations) {
    if (filter.exclude_empty && (rel.a.empty() || rel.b.empty())) continue;
    if (filter.spanning_only && !rel.touches_spanning) continue;
    out.push_back(rel);
  }
  return out;
}

Metrics metrics_from_counts(long correct, long predicted, long truth) {
  Metrics m;
  m.correct = correct;
  m.predicted = predicted;
  m.truth = truth;
  if (predicted > 0) {
    m.precision = static_cast<double>(correct) / static_cast<double>(predicted);
  } else {
    m.precision = (truth == 0) ? 1.0 : 0.0;
  }
  if (truth > 0) {
    m.recall = static_cast<double>(correct) / static_cast<double>(truth);
  } else {
    m.recall = (predicted == 0) ? 1.0 : 0.0;
  }
  double pr = m.precision + m.recall;
  m.f1 = pr > 0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

Metrics compare(const std::vector<ContentRelation>& predicted,
                const std::vector<ContentRelation>& truth) {
  using Key = std::tuple<std::string, std::string, RelationLabel>;
  auto key_of = [](const ContentRelation& rel) -> Key {
    // endpoint order within a relation is immaterial
    if (rel.b < rel.a) return {rel.b, rel.a, rel.label};
    return {rel.a, rel.b, rel.label};
  };
  std::map<Key, long> remaining;
  for (const ContentRelation& rel : truth) remaining[key_of(rel)]++;
  long correct = 0;
  for (const ContentRelation& rel : predicted) {
    auto it = remaining.find(key_of(rel));
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++correct;
    }
  }
  return metrics_from_counts(correct, static_cast<long>(predicted.size()),
                             static_cast<long>(truth.size()));
}

AggregateMetrics aggregate(const std::vector<Metrics>& per_table) {
  if (per_table.empty()) {
    throw std::runtime_error("cannot aggregate metrics over an empty dataset");
  }
  AggregateMetrics agg;
  double p_sum = 0, r_sum = 0;
  long correct = 0, predicted = 0, truth = 0;
  for (const Metrics& m : per_table) {
    p_sum += m.precision;
    r_sum += m.recall;
    correct += m.correct;
    predicted += m.predicted;
    truth += m.truth;
  }
  const double n = static_cast<double>(per_table.size());
  agg.macro.precision = p_sum / n;
  agg.macro.recall = r_sum / n;
  double pr = agg.macro.precision + agg.macro.recall;
  agg.macro.f1 = pr > 0 ? 2.0 * agg.macro.precision * agg.macro.recall / pr : 0.0;
  agg.macro.correct = correct;
  agg.macro.predicted = predicted;
  agg.macro.truth = truth;
  agg.micro = metrics_from_counts(correct, predicted, truth);
  return agg;
}

}  // namespace tsr
