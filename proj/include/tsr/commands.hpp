#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsr/metrics.hpp"
#include "tsr/model.hpp"
#include "tsr/synth.hpp"

namespace tsr {

// Subcommand drivers. They throw std::runtime_error /
// std::invalid_argument on failure; the CLI front end maps exceptions to
// a nonzero exit code. All output files are written atomically (tmp +
// rename), so a failing run never leaves a partially written table.

struct SynthArgs {
  std::filesystem::path out_dir;
  int count{100};
  GenConfig gen;
};
// Writes table_NNNNN.chunk.json / .structure.json pairs plus
// manifest.json. Byte-identical across reruns with the same arguments.
void cmd_synth(const SynthArgs& args);

struct TrainArgs {
  // either data_dir with paired *.chunk.json / *.structure.json files,
  // or separate chunk/structure directories paired by filename stem
  std::filesystem::path data_dir;
  std::filesystem::path chunks_dir;
  std::filesystem::path structures_dir;
  std::filesystem::path checkpoint_out{"checkpoint.json"};
  std::filesystem::path loss_log;  // optional per-epoch CSV
  HyperParams hyper;
  std::uint64_t seed{0};
  int threads{1};  // data loading only; optimization is sequential
  bool quiet{false};
};
struct TrainSummary {
  int tables{0};
  double label_coverage{1.0};  // truth relations present as graph edges
  std::vector<double> epoch_mean_loss;
};
TrainSummary cmd_train(const TrainArgs& args);

struct InferArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path chunks_dir;
  std::filesystem::path out_dir;
  // optional: score the predicted edge labels directly against these
  // ground-truth structures (cells aligned by matching), independently of
  // the recovered structures that cmd_eval scores
  std::filesystem::path truth_dir;
  bool dump_edges{false};  // also write per-edge logits
  int threads{1};
  bool quiet{false};
};
struct InferSummary {
  int tables{0};
  // present when truth_dir was given: direct edge-label scores
  std::vector<Metrics> direct_per_table;
  AggregateMetrics direct;
};
InferSummary cmd_infer(const InferArgs& args);

struct EvalArgs {
  std::filesystem::path pred_dir;
  std::filesystem::path truth_dir;
  std::filesystem::path report_path;  // optional JSON report
  bool only_complicated{false};       // keep tables whose truth has a spanning cell
  bool spanning_only{false};          // score only relations touching a spanning cell
  bool exclude_empty{false};          // ignore relations with empty cell content
  int threads{1};
  bool quiet{false};
};
struct EvalSummary {
  AggregateMetrics aggregate;
  std::vector<std::pair<std::string, Metrics>> per_table;
};
EvalSummary cmd_eval(const EvalArgs& args);

}  // namespace tsr
