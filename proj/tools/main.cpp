#include <cstdint>
#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "tsr/commands.hpp"

namespace {

// Shared model/training flags; defaults reproduce the standard recipe.
void add_hyper_flags(CLI::App* cmd, tsr::HyperParams& hyper) {
  cmd->add_option("--k", hyper.k, "nearest neighbors for graph construction")
      ->envname("TSR_K");
  cmd->add_option("--blocks", hyper.blocks, "attention blocks per stream")
      ->envname("TSR_BLOCKS");
  cmd->add_option("--dim", hyper.dim, "representation width")->envname("TSR_DIM");
  cmd->add_option("--ffn-dim", hyper.ffn_dim, "feed-forward hidden width")
      ->envname("TSR_FFN_DIM");
  cmd->add_option("--lr", hyper.learning_rate, "Adam learning rate")->envname("TSR_LR");
  cmd->add_option("--dropout", hyper.dropout, "sub-layer dropout probability")
      ->envname("TSR_DROPOUT");
  cmd->add_option("--weight-decay", hyper.weight_decay, "L2 penalty on parameters")
      ->envname("TSR_WEIGHT_DECAY");
  cmd->add_option("--epochs", hyper.epochs, "training epochs")->envname("TSR_EPOCHS");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table structure recognition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config");

  tsr::SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate synthetic chunk/structure pairs");
  synth->add_option("--out", synth_args.out_dir, "output directory")->required();
  synth->add_option("--n", synth_args.count, "number of tables");
  synth->add_option("--seed", synth_args.gen.seed, "generator seed")->envname("TSR_SEED");
  synth->add_option("--min-rows", synth_args.gen.min_rows);
  synth->add_option("--max-rows", synth_args.gen.max_rows);
  synth->add_option("--min-cols", synth_args.gen.min_cols);
  synth->add_option("--max-cols", synth_args.gen.max_cols);
  synth->add_option("--complicated-prob", synth_args.gen.complicated_prob,
                    "probability of spanning cells per table");
  synth->add_flag("--duplicate-content", synth_args.gen.duplicate_content,
                  "reuse a small token pool for cell contents");

  tsr::TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a relation classifier");
  train->add_option("--data", train_args.data_dir,
                    "directory with *.chunk.json / *.structure.json pairs");
  train->add_option("--chunks", train_args.chunks_dir, "chunk file directory");
  train->add_option("--structures", train_args.structures_dir, "structure file directory");
  train->add_option("--out", train_args.checkpoint_out, "checkpoint path");
  train->add_option("--loss-log", train_args.loss_log, "per-epoch loss CSV path");
  train->add_option("--seed", train_args.seed, "training seed")->envname("TSR_SEED");
  train->add_option("--threads", train_args.threads, "data loading threads")
      ->envname("TSR_THREADS");
  add_hyper_flags(train, train_args.hyper);

  tsr::InferArgs infer_args;
  CLI::App* infer = app.add_subcommand("infer", "predict structures for chunk files");
  infer->add_option("--checkpoint", infer_args.checkpoint, "trained checkpoint")->required();
  infer->add_option("--chunks", infer_args.chunks_dir, "chunk file directory")->required();
  infer->add_option("--out", infer_args.out_dir, "output directory")->required();
  infer->add_flag("--dump-edges", infer_args.dump_edges, "also write per-edge logits");
  infer->add_option("--threads", infer_args.threads, "worker threads")->envname("TSR_THREADS");

  tsr::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "score predicted structures against truth");
  eval->add_option("--pred", eval_args.pred_dir, "predicted structure directory")->required();
  eval->add_option("--truth", eval_args.truth_dir, "ground-truth structure directory")
      ->required();
  eval->add_option("--report", eval_args.report_path, "JSON report path");
  eval->add_flag("--only-complicated", eval_args.only_complicated,
                 "restrict to tables whose truth contains a spanning cell");
  eval->add_flag("--spanning-only", eval_args.spanning_only,
                 "score only relations touching a spanning cell");
  eval->add_flag("--exclude-empty", eval_args.exclude_empty,
                 "ignore relations with empty cell content");
  eval->add_option("--threads", eval_args.threads, "worker threads")->envname("TSR_THREADS");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      tsr::cmd_synth(synth_args);
    } else if (train->parsed()) {
      if (train_args.data_dir.empty() &&
          (train_args.chunks_dir.empty() || train_args.structures_dir.empty())) {
        throw std::runtime_error("pass --data, or both --chunks and --structures");
      }
      tsr::cmd_train(train_args);
    } else if (infer->parsed()) {
      tsr::cmd_infer(infer_args);
    } else if (eval->parsed()) {
      tsr::cmd_eval(eval_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
