#include "tsr/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tsr/graph.hpp"
#include "tsr/recover.hpp"

namespace tsr {

namespace fs = std::filesystem;

namespace {

// Runs fn(0..count-1) on up to `threads` workers; rethrows the first
// worker exception. Used only for pure per-table stages.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n_workers = std::min(threads, count);
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string stem_of(const fs::path& path) {
  std::string name = path.filename().string();
  auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

// Files in dir keyed by stem (filename up to the first dot). When
// required_marker is non-empty, only filenames containing it are taken.
std::map<std::string, fs::path> collect_by_stem(const fs::path& dir,
                                                const std::string& required_marker) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error(dir.string() + " is not a directory");
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (!required_marker.empty() && name.find(required_marker) == std::string::npos) continue;
    if (name == "manifest.json") continue;
    out[stem_of(entry.path())] = entry.path();
  }
  return out;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << bytes;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct TablePair {
  std::string name;
  fs::path chunks;
  fs::path structure;
};

std::vector<TablePair> discover_pairs(const fs::path& data_dir, const fs::path& chunks_dir,
                                      const fs::path& structures_dir) {
  std::map<std::string, fs::path> chunks, structures;
  if (!data_dir.empty()) {
    chunks = collect_by_stem(data_dir, ".chunk");
    structures = collect_by_stem(data_dir, ".structure");
  } else {
    chunks = collect_by_stem(chunks_dir, "");
    structures = collect_by_stem(structures_dir, "");
  }
  std::vector<TablePair> pairs;
  for (const auto& [stem, chunk_path] : chunks) {
    auto it = structures.find(stem);
    if (it != structures.end()) {
      pairs.push_back(TablePair{stem, chunk_path, it->second});
    }
  }
  return pairs;
}

// Per-table training data: labeled graph plus relation coverage counts.
struct LoadedTable {
  CellGraph graph;
  long truth_relations{0};
  long covered_relations{0};
  bool usable{false};
};

LoadedTable load_training_table(const TablePair& pair, int k) {
  LoadedTable out;
  ChunkFile chunks = read_chunks(pair.chunks);
  TableStructure truth = read_structure(pair.structure);
  CellMatching matching = match_cells(chunks, truth);

  // Remap truth relations into chunk ids; relations touching an unmatched
  // truth cell cannot be labeled and are dropped (still counted for the
  // coverage report).
  std::vector<int> chunk_of_truth(truth.cells.size(), -1);
  for (auto [chunk_idx, truth_idx] : matching.pairs) chunk_of_truth[truth_idx] = chunk_idx;
  std::set<Relation> truth_relations = truth_relations_of(truth);
  std::set<Relation> remapped;
  out.truth_relations = static_cast<long>(truth_relations.size());
  for (const Relation& rel : truth_relations) {
    int a = chunk_of_truth[rel.a];
    int b = chunk_of_truth[rel.b];
    if (a >= 0 && b >= 0) remapped.insert(canonical_relation(a, b, rel.label));
  }

  if (chunks.cells.size() < 2) return out;
  out.graph = build_graph(chunks.cells, k);
  if (out.graph.edges.empty()) return out;
  LabelReport report = label_edges(out.graph, remapped);
  out.covered_relations = report.covered;
  out.usable = true;
  return out;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"p", m.precision},
          {"r", m.recall},
          {"f1", m.f1},
          {"correct", m.correct},
          {"predicted", m.predicted},
          {"truth", m.truth}};
}

}  // namespace

void cmd_synth(const SynthArgs& args) {
  if (args.count < 1) throw std::invalid_argument("table count must be positive");
  fs::create_directories(args.out_dir);
  std::vector<GeneratedTable> tables = generate(args.gen, args.count);

  nlohmann::ordered_json manifest;
  manifest["config"] = {{"seed", args.gen.seed},
                        {"count", args.count},
                        {"min_rows", args.gen.min_rows},
                        {"max_rows", args.gen.max_rows},
                        {"min_cols", args.gen.min_cols},
                        {"max_cols", args.gen.max_cols},
                        {"complicated_prob", args.gen.complicated_prob},
                        {"duplicate_content", args.gen.duplicate_content}};
  manifest["tables"] = nlohmann::ordered_json::array();
  for (int i = 0; i < args.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "table_%05d", i);
    fs::path chunk_path = args.out_dir / (std::string(name) + ".chunk.json");
    fs::path structure_path = args.out_dir / (std::string(name) + ".structure.json");
    write_chunks(tables[i].chunks, chunk_path);
    write_structure(tables[i].structure, structure_path);
    manifest["tables"].push_back({{"index", i},
                                  {"chunks", chunk_path.filename().string()},
                                  {"structure", structure_path.filename().string()},
                                  {"seed", tables[i].table_seed},
                                  {"complicated", tables[i].complicated}});
  }
  atomic_write(args.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

TrainSummary cmd_train(const TrainArgs& args) {
  std::vector<TablePair> pairs =
      discover_pairs(args.data_dir, args.chunks_dir, args.structures_dir);
  if (pairs.empty()) throw std::runtime_error("no chunk/structure pairs found");

  std::vector<LoadedTable> loaded(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), args.threads,
               [&](int i) { loaded[i] = load_training_table(pairs[i], args.hyper.k); });

  std::vector<CellGraph> dataset;
  long truth_total = 0, covered_total = 0;
  for (LoadedTable& table : loaded) {
    truth_total += table.truth_relations;
    covered_total += table.covered_relations;
    if (table.usable) dataset.push_back(std::move(table.graph));
  }
  if (dataset.empty()) throw std::runtime_error("no usable tables in the dataset");

  TrainSummary summary;
  summary.tables = static_cast<int>(dataset.size());
  summary.label_coverage =
      truth_total > 0 ? static_cast<double>(covered_total) / truth_total : 1.0;
  if (summary.label_coverage < 0.9) {
    std::cerr << "warning: edge label coverage is only " << summary.label_coverage
              << "; consider a larger --k\n";
  }

  ModelParams params = train(dataset, args.hyper, args.seed, &summary.epoch_mean_loss);
  save_checkpoint(params, args.seed, args.checkpoint_out);

  if (!args.loss_log.empty()) {
    std::ostringstream csv;
    csv << "epoch,mean_loss\n";
    for (size_t e = 0; e < summary.epoch_mean_loss.size(); ++e) {
      csv << (e + 1) << ',' << format_double(summary.epoch_mean_loss[e]) << '\n';
    }
    atomic_write(args.loss_log, csv.str());
  }
  if (!args.quiet) {
    std::cout << "trained on " << summary.tables << " tables, label coverage "
              << summary.label_coverage << "\n";
    if (!summary.epoch_mean_loss.empty()) {
      std::cout << "first epoch loss " << summary.epoch_mean_loss.front()
                << ", final epoch loss " << summary.epoch_mean_loss.back() << "\n";
    }
  }
  return summary;
}

InferSummary cmd_infer(const InferArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  // directories may hold chunk and structure files side by side; prefer
  // the explicit .chunk marker and fall back to every file
  std::map<std::string, fs::path> chunk_files = collect_by_stem(args.chunks_dir, ".chunk");
  if (chunk_files.empty()) chunk_files = collect_by_stem(args.chunks_dir, "");
  if (chunk_files.empty()) throw std::runtime_error("no chunk files found");
  std::map<std::string, fs::path> truth_files;
  if (!args.truth_dir.empty()) {
    truth_files = collect_by_stem(args.truth_dir, ".structure");
    if (truth_files.empty()) truth_files = collect_by_stem(args.truth_dir, "");
  }
  fs::create_directories(args.out_dir);

  std::vector<std::pair<std::string, fs::path>> inputs(chunk_files.begin(), chunk_files.end());
  std::vector<Metrics> direct(inputs.size());
  std::vector<char> scored(inputs.size(), 0);
  parallel_for(static_cast<int>(inputs.size()), args.threads, [&](int i) {
    const auto& [stem, path] = inputs[i];
    ChunkFile chunks = read_chunks(path);

    LabeledGraph labeled;
    labeled.cells = chunks.cells;
    CellGraph graph;
    std::vector<RelationLabel> predicted;
    if (chunks.cells.size() >= 2) {
      graph = build_graph(chunks.cells, ckpt.params.hyper.k);
      predicted = predict(graph, ckpt.params);
      for (size_t e = 0; e < predicted.size(); ++e) {
        if (predicted[e] != RelationLabel::NoRelation) {
          labeled.relations.insert(canonical_relation(graph.edges[e].first,
                                                      graph.edges[e].second, predicted[e]));
        }
      }
    }
    TableStructure structure = recover_structure(labeled);

    {
      fs::path tmp_target = args.out_dir / (stem + ".structure.json");
      // write_structure output must stay canonical; reuse it via a temp
      fs::path tmp = tmp_target;
      tmp += ".tmp";
      write_structure(structure, tmp);
      fs::rename(tmp, tmp_target);
    }

    if (args.dump_edges) {
      ForwardTrace trace;
      nlohmann::ordered_json dump;
      dump["edges"] = nlohmann::ordered_json::array();
      if (!graph.edges.empty()) {
        trace = forward(graph, ckpt.params, RunMode::Eval);
        for (size_t e = 0; e < graph.edges.size(); ++e) {
          dump["edges"].push_back(
              {{"a", graph.edges[e].first},
               {"b", graph.edges[e].second},
               {"label", to_string(predicted[e])},
               {"logits",
                {trace.logits(e, 0), trace.logits(e, 1), trace.logits(e, 2)}}});
        }
      }
      atomic_write(args.out_dir / (stem + ".edges.json"), dump.dump(2) + "\n");
    }

    // direct path: score predicted edge labels as id relations against
    // the truth relations, with cells aligned by matching
    auto truth_it = truth_files.find(stem);
    if (truth_it != truth_files.end()) {
      TableStructure truth = read_structure(truth_it->second);
      CellMatching matching = match_cells(chunks, truth);
      std::vector<int> truth_of_chunk(chunks.cells.size(), -1);
      for (auto [ci, ti] : matching.pairs) truth_of_chunk[ci] = ti;
      std::set<Relation> predicted_mapped;
      long unmappable = 0;
      for (const Relation& rel : labeled.relations) {
        int a = truth_of_chunk[rel.a], b = truth_of_chunk[rel.b];
        if (a >= 0 && b >= 0 && a != b) {
          predicted_mapped.insert(canonical_relation(a, b, rel.label));
        } else {
          ++unmappable;  // still counts as a prediction
        }
      }
      std::set<Relation> truth_rel = truth_relations_of(truth);
      long correct = 0;
      for (const Relation& rel : predicted_mapped) correct += truth_rel.count(rel);
      direct[i] = metrics_from_counts(
          correct, static_cast<long>(predicted_mapped.size()) + unmappable,
          static_cast<long>(truth_rel.size()));
      scored[i] = 1;
    }
  });

  InferSummary summary;
  summary.tables = static_cast<int>(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (scored[i]) summary.direct_per_table.push_back(direct[i]);
  }
  if (!args.truth_dir.empty()) {
    if (summary.direct_per_table.empty()) {
      throw std::runtime_error("no truth structures matched the chunk files");
    }
    summary.direct = aggregate(summary.direct_per_table);
  }
  if (!args.quiet) {
    std::cout << "wrote " << inputs.size() << " structure files to " << args.out_dir.string()
              << "\n";
    if (!summary.direct_per_table.empty()) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "direct edge-label scores: macro P %.4f R %.4f F1 %.4f | micro P %.4f "
                    "R %.4f F1 %.4f\n",
                    summary.direct.macro.precision, summary.direct.macro.recall,
                    summary.direct.macro.f1, summary.direct.micro.precision,
                    summary.direct.micro.recall, summary.direct.micro.f1);
      std::cout << line;
    }
  }
  return summary;
}

EvalSummary cmd_eval(const EvalArgs& args) {
  // prefer explicit .structure files; otherwise take everything except
  // chunk and edge-dump files sitting in the same directory
  auto collect_structures = [](const fs::path& dir) {
    std::map<std::string, fs::path> files = collect_by_stem(dir, ".structure");
    if (!files.empty()) return files;
    files = collect_by_stem(dir, "");
    for (auto it = files.begin(); it != files.end();) {
      std::string name = it->second.filename().string();
      if (name.find(".chunk") != std::string::npos ||
          name.find(".edges") != std::string::npos) {
        it = files.erase(it);
      } else {
        ++it;
      }
    }
    return files;
  };
  std::map<std::string, fs::path> pred = collect_structures(args.pred_dir);
  std::map<std::string, fs::path> truth = collect_structures(args.truth_dir);

  std::vector<std::string> orphans;
  for (const auto& [stem, path] : pred) {
    if (!truth.count(stem)) orphans.push_back("predicted " + stem);
  }
  for (const auto& [stem, path] : truth) {
    if (!pred.count(stem)) orphans.push_back("truth " + stem);
  }
  if (!orphans.empty()) {
    std::string msg = "prediction/truth pairing mismatch:";
    for (const std::string& o : orphans) msg += " " + o;
    throw std::runtime_error(msg);
  }
  if (pred.empty()) throw std::runtime_error("no structure files to evaluate");

  RelationFilter filter;
  filter.exclude_empty = args.exclude_empty;
  filter.spanning_only = args.spanning_only;

  std::vector<std::pair<std::string, fs::path>> names(pred.begin(), pred.end());
  std::vector<int> keep(names.size(), 1);
  std::vector<Metrics> metrics(names.size());
  parallel_for(static_cast<int>(names.size()), args.threads, [&](int i) {
    const std::string& stem = names[i].first;
    TableStructure truth_structure = read_structure(truth.at(stem));
    if (args.only_complicated) {
      bool complicated = std::any_of(truth_structure.cells.begin(),
                                     truth_structure.cells.end(),
                                     [](const StructuredCell& sc) { return sc.spanning(); });
      if (!complicated) {
        keep[i] = 0;
        return;
      }
    }
    TableStructure pred_structure = read_structure(names[i].second);
    auto pred_rel = filter_relations(relations_from_structure(pred_structure), filter);
    auto truth_rel = filter_relations(relations_from_structure(truth_structure), filter);
    metrics[i] = compare(pred_rel, truth_rel);
  });

  EvalSummary summary;
  std::vector<Metrics> kept;
  for (size_t i = 0; i < names.size(); ++i) {
    if (!keep[i]) continue;
    kept.push_back(metrics[i]);
    summary.per_table.emplace_back(names[i].first, metrics[i]);
  }
  if (kept.empty()) {
    throw std::runtime_error(args.only_complicated
                                 ? "no complicated tables in the dataset"
                                 : "no tables left to evaluate");
  }
  summary.aggregate = aggregate(kept);

  if (!args.report_path.empty()) {
    nlohmann::ordered_json report;
    report["macro"] = metrics_json(summary.aggregate.macro);
    report["micro"] = metrics_json(summary.aggregate.micro);
    report["per_table"] = nlohmann::ordered_json::array();
    for (const auto& [name, m] : summary.per_table) {
      nlohmann::ordered_json entry = metrics_json(m);
      entry["name"] = name;
      report["per_table"].push_back(std::move(entry));
    }
    atomic_write(args.report_path, report.dump(2) + "\n");
  }

  if (!args.quiet) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %9s %9s %9s  (correct/predicted/truth)\n",
                  "", "P", "R", "F1");
    std::cout << line;
    auto print_row = [&](const char* name, const Metrics& m) {
      std::snprintf(line, sizeof(line), "%-12s %9.4f %9.4f %9.4f  (%ld/%ld/%ld)\n", name,
                    m.precision, m.recall, m.f1, m.correct, m.predicted, m.truth);
      std::cout << line;
    };
    print_row("macro", summary.aggregate.macro);
    print_row("micro", summary.aggregate.micro);
    std::cout << summary.per_table.size() << " tables\n";
  }
  return summary;
}

}  // namespace tsr
