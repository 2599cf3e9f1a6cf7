#include "sneurod/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <vector>

#include "CLI11.hpp"
#include "sneurod/config.hpp"
#include "sneurod/data.hpp"
#include "sneurod/explain.hpp"
#include "sneurod/metrics.hpp"
#include "sneurod/model.hpp"
#include "sneurod/training.hpp"

namespace sneurod {
namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

// Refuses to reuse a non-empty directory unless forced.
void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError("output path " + dir.string() + " is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw UsageError("output directory " + dir.string() + " is not empty (use --force to replace its contents)");
  }
}

Dataset load_pipeline_data(const DataConfig& dc) {
  if (dc.manifest.empty()) throw ConfigError("data.manifest is required");
  if (!fs::exists(dc.manifest)) throw DataError("manifest not found: " + dc.manifest.string());
  Dataset data = load_manifest(dc.manifest, dc.image_root);
  if (dc.plane) {
    std::erase_if(data, [&](const SliceRecord& r) { return r.plane != *dc.plane; });
  }
  if (dc.gamma) apply_gamma(data, *dc.gamma);
  return data;
}

struct Evaluation {
  MetricsReport report;
  ConfusionMatrix confusion;
  RocCurve roc;
};

Evaluation evaluate_split(const SNeurodCNNModel& model, const Dataset& data, std::size_t batch_size) {
  const EvalSummary s = evaluate(model, data, batch_size, 0.0);
  std::vector<int> labels;
  for (const auto& r : data) labels.push_back(r.label);
  Evaluation e;
  e.confusion = confusion_from_predictions(s.probs, labels);
  e.report = evaluate_predictions(s.probs, labels);
  if (!e.report.auc_undefined) {
    std::vector<double> scores(labels.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = s.probs(i, std::size_t(1));
    e.roc = roc_auc(scores, labels).curve;
  }
  return e;
}

void write_evaluation(const Evaluation& e, const fs::path& dir) {
  write_metrics_json(e.report, e.confusion, dir / "metrics.json");
  if (!e.roc.empty()) write_roc_csv(e.roc, dir / "roc.csv");
}

int cmd_synth(const SynthSpec& spec, const fs::path& out_dir, bool force, std::ostream& out) {
  prepare_output_dir(out_dir, force);
  if (force && fs::exists(out_dir)) fs::remove_all(out_dir);
  const Dataset data = synth_generate(spec, out_dir);
  out << "wrote " << data.size() << " images and manifest to " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_preprocess(const fs::path& manifest, fs::path image_root, double gamma, const fs::path& out_dir, bool force,
                   std::ostream& out) {
  if (manifest.empty()) throw UsageError("preprocess needs --manifest or --config");
  if (image_root.empty()) image_root = manifest.parent_path();
  const GammaSpec spec{gamma};
  const auto rows = read_manifest(manifest);
  std::vector<GrayImage> corrected;
  corrected.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const fs::path src = image_root / rows[i].path;
    if (!fs::exists(src)) throw ManifestError(i, "image file not found: " + src.string());
    GrayImage img = read_pgm(src);
    img.pixels = gamma_correct(img.pixels, spec);
    corrected.push_back(std::move(img));
  }
  prepare_output_dir(out_dir, force);
  if (force && fs::exists(out_dir)) fs::remove_all(out_dir);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const fs::path dst = out_dir / rows[i].path;
    fs::create_directories(dst.parent_path());
    write_pgm(corrected[i], dst);
  }
  write_manifest(rows, out_dir / "manifest.csv");
  out << "gamma-corrected " << rows.size() << " images (gamma " << gamma << ") into " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& rc, double time_budget, bool force, std::ostream& out) {
  prepare_output_dir(rc.output_dir, force);
  const Dataset data = load_pipeline_data(rc.data);
  const DatasetSplit split = split_dataset(data, rc.data.split_spec());
  Prng init(rc.train.seed);
  SNeurodCNNModel model = build_model(rc.model, init);
  FitHooks hooks;
  const auto started = std::chrono::steady_clock::now();
  hooks.on_epoch_end = [&](const EpochRecord& r, const SNeurodCNNModel&) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    char line[200];
    std::snprintf(line, sizeof line, "epoch %zu/%zu  train_loss %.4f  train_acc %.3f  val_loss %.4f  val_acc %.3f  [%.1fs]\n",
                  r.epoch, rc.train.max_epochs, r.train_loss, r.train_acc, r.val_loss, r.val_acc, secs);
    out << line << std::flush;
  };
  if (time_budget > 0.0) {
    // Stop once another epoch of average length would overrun the budget.
    hooks.stop_requested = [&, time_budget](const EpochRecord& r) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return secs + secs / double(r.epoch) > time_budget;
    };
  }
  const FitResult fr = fit(model, split.train, split.validation, rc.train, hooks);
  const Evaluation e = evaluate_split(model, split.test, rc.train.batch_size);

  fs::create_directories(rc.output_dir);
  save_checkpoint(model, rc.output_dir / "model.sndc", {std::int64_t(fr.best_epoch), fr.best_value});
  write_history_csv(fr.history, rc.output_dir / "history.csv");
  write_evaluation(e, rc.output_dir);
  out << "trained " << fr.history.size() << " epochs (best " << fr.best_epoch << "); test accuracy "
      << e.report.accuracy << ", AUC " << e.report.auc << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, const fs::path& checkpoint, const fs::path& manifest, std::optional<fs::path> out_dir,
             bool force, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  Dataset subject;
  if (!manifest.empty()) {
    DataConfig dc = rc.data;
    dc.manifest = manifest;
    dc.image_root = manifest.parent_path();
    subject = load_pipeline_data(dc);
  } else {
    subject = split_dataset(load_pipeline_data(rc.data), rc.data.split_spec()).test;
  }
  const Evaluation e = evaluate_split(ck.model, subject, rc.train.batch_size);
  const fs::path dir = out_dir.value_or(rc.output_dir / "eval");
  prepare_output_dir(dir, force);
  fs::create_directories(dir);
  write_evaluation(e, dir);
  out << "evaluated " << subject.size() << " images; accuracy " << e.report.accuracy << ", AUC " << e.report.auc
      << "\n";
  return kExitOk;
}

int cmd_explain(const RunConfig& rc, const fs::path& checkpoint, const std::vector<fs::path>& images,
                std::size_t class_index, double alpha, const fs::path& out_dir, bool force, std::ostream& out) {
  if (images.empty()) throw UsageError("explain needs at least one --image");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const ColorMap cmap = ColorMap::purple_to_yellow();
  struct Result {
    std::string stem;
    Heatmap heatmap;
    RgbImage overlay;
  };
  std::vector<Result> results;
  for (const auto& path : images) {
    const Tensor original = load_pgm(path);
    const Tensor input = rc.data.gamma ? gamma_correct(original, *rc.data.gamma) : original;
    Heatmap hm = grad_cam(ck.model, input, class_index);
    RgbImage ov = overlay(colorize(hm, cmap), original, alpha);
    results.push_back({path.stem().string(), std::move(hm), std::move(ov)});
  }
  prepare_output_dir(out_dir, force);
  fs::create_directories(out_dir);
  for (const auto& r : results) {
    save_pgm(r.heatmap.values, out_dir / (r.stem + "_heatmap.pgm"));
    write_ppm(r.overlay, out_dir / (r.stem + "_overlay.ppm"));
  }
  out << "wrote " << results.size() << " heatmap/overlay pairs to " << out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SNeurodCNN pipeline: synthesize, preprocess, train, evaluate and explain"};
  app.require_subcommand(1);
  bool force = false;

  SynthSpec synth;
  std::string synth_out, synth_plane = "midsagittal";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled slice dataset");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--n", synth.n, "number of images (even)");
  synth_cmd->add_option("--height", synth.height, "image height");
  synth_cmd->add_option("--width", synth.width, "image width");
  synth_cmd->add_option("--cue-strength", synth.cue_strength, "class-1 cue contrast in (0, 1]");
  synth_cmd->add_option("--brightness", synth.brightness, "global intensity scale in (0, 1]");
  synth_cmd->add_option("--plane", synth_plane, "midsagittal or parasagittal");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_flag("--force", force, "replace an existing output directory");

  std::string config_path, manifest, image_root, out_dir, checkpoint;
  double gamma = 0.2;
  auto* pre_cmd = app.add_subcommand("preprocess", "write gamma-corrected copies of a manifest's images");
  pre_cmd->add_option("--config", config_path, "run config (data section supplies manifest and gamma)");
  pre_cmd->add_option("--manifest", manifest, "manifest CSV");
  pre_cmd->add_option("--image-root", image_root, "directory image paths are relative to");
  auto* gamma_opt = pre_cmd->add_option("--gamma", gamma, "gamma exponent");
  pre_cmd->add_option("--out", out_dir, "output directory")->required();
  pre_cmd->add_flag("--force", force, "replace an existing output directory");

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, patience;
  double time_budget = 0.0;
  std::optional<double> learning_rate;
  auto* train_cmd = app.add_subcommand("train", "train on the configured dataset and report test metrics");
  train_cmd->add_option("--config", config_path, "run config JSON")->required();
  train_cmd->add_option("--seed", seed, "override train.seed");
  train_cmd->add_option("--epochs", epochs, "override train.max_epochs");
  train_cmd->add_option("--batch-size", batch_size, "override train.batch_size");
  train_cmd->add_option("--learning-rate", learning_rate, "override train.learning_rate");
  train_cmd->add_option("--patience", patience, "override train.patience");
  train_cmd->add_option("--out", out_dir, "override output.directory");
  train_cmd->add_option("--time-budget", time_budget, "wall-clock seconds for the training loop (0 = unlimited)")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--force", force, "replace an existing output directory");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split or a manifest");
  eval_cmd->add_option("--config", config_path, "run config JSON")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--manifest", manifest, "evaluate every record of this manifest instead of the test split");
  eval_cmd->add_option("--out", out_dir, "output directory (default <output>/eval)");
  eval_cmd->add_flag("--force", force, "replace an existing output directory");

  std::vector<std::string> images;
  std::size_t class_index = 1;
  double alpha = 0.5;
  auto* explain_cmd = app.add_subcommand("explain", "Grad-CAM heatmaps and overlays for images");
  explain_cmd->add_option("--config", config_path, "run config JSON")->required();
  explain_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  explain_cmd->add_option("--image", images, "PGM image (repeatable)")->required();
  explain_cmd->add_option("--class", class_index, "target class (0 = MCI, 1 = AD)");
  explain_cmd->add_option("--alpha", alpha, "heatmap opacity in [0, 1]");
  explain_cmd->add_option("--out", out_dir, "output directory")->required();
  explain_cmd->add_flag("--force", force, "replace an existing output directory");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth_cmd) {
      synth.plane = parse_plane(synth_plane);
      return cmd_synth(synth, synth_out, force, out);
    }
    if (*pre_cmd) {
      if (!config_path.empty()) {
        const RunConfig rc = load_run_config(config_path);
        if (manifest.empty()) manifest = rc.data.manifest.string();
        if (image_root.empty()) image_root = rc.data.image_root.string();
        if (!*gamma_opt && rc.data.gamma) gamma = rc.data.gamma->gamma;
      }
      return cmd_preprocess(manifest, image_root, gamma, out_dir, force, out);
    }
    RunConfig rc = load_run_config(config_path);
    if (*train_cmd) {
      if (seed) rc.train.seed = *seed;
      if (epochs) rc.train.max_epochs = *epochs;
      if (batch_size) rc.train.batch_size = *batch_size;
      if (learning_rate) rc.train.learning_rate = *learning_rate;
      if (patience) rc.train.patience = *patience;
      if (!out_dir.empty()) rc.output_dir = out_dir;
      if (rc.train.batch_size == 0 || !(rc.train.learning_rate > 0.0)) {
        throw ConfigError("batch size and learning rate must be positive");
      }
      return cmd_train(rc, time_budget, force, out);
    }
    if (*eval_cmd) {
      std::optional<fs::path> dir;
      if (!out_dir.empty()) dir = out_dir;
      return cmd_eval(rc, checkpoint, manifest, dir, force, out);
    }
    if (*explain_cmd) {
      std::vector<fs::path> paths(images.begin(), images.end());
      return cmd_explain(rc, checkpoint, paths, class_index, alpha, out_dir, force, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace sneurod
