// Command-line entry point: dataset generation, two-stage training,
// cross-validated evaluation, loss-curve export, and visualization.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mllp/config.hpp"
#include "mllp/detect.hpp"
#include "mllp/eval.hpp"
#include "mllp/losses.hpp"
#include "mllp/propnet.hpp"
#include "mllp/rng.hpp"
#include "mllp/synthgen.hpp"

namespace fs = std::filesystem;
using namespace mllp;

namespace {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> dataset, output, checkpoints;
  std::optional<std::string> loss_mode, mask_mode, profile;
  std::optional<int> folds;
};

RunConfig resolve_config(const Overrides& ov) {
  RunConfig cfg = ov.config_path ? load_run_config(*ov.config_path) : default_run_config();
  if (ov.seed) cfg.seed = cfg.generator_seed = *ov.seed;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.dataset) cfg.dataset_path = *ov.dataset;
  if (ov.output) cfg.output_path = *ov.output;
  if (ov.checkpoints) cfg.checkpoint_path = *ov.checkpoints;
  if (ov.loss_mode) cfg.loss_mode = loss_mode_from_name(*ov.loss_mode);
  if (ov.mask_mode) cfg.mask_mode = mask_mode_from_name(*ov.mask_mode);
  if (ov.profile) cfg.generator_profile = *ov.profile;
  if (ov.folds) cfg.eval_folds = *ov.folds;
  apply_env_seed(cfg);
  profile_from_name(cfg.generator_profile);
  return cfg;
}

void add_common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "JSON config file; flags override file values");
  cmd->add_option("--seed", ov.seed, "RNG seed");
  cmd->add_option("--threads", ov.threads, "worker threads (default 1 for bit-reproducibility)");
}

int cmd_generate(const RunConfig& cfg, bool annotate_all) {
  generate_benchmark(profile_from_name(cfg.generator_profile), cfg.generator_seed,
                     cfg.dataset_path, annotate_all || cfg.generator_annotate_all);
  std::cout << "wrote " << cfg.dataset_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto dataset = load_dataset(cfg.dataset_path);
  fs::create_directories(cfg.checkpoint_path);
  const PipelineConfig pc = cfg.pipeline();

  Model detector, classifier;
  std::vector<ImageGrid> masks;
  switch (cfg.mask_mode) {
    case MaskMode::Masked: {
      bool any_annotated = false;
      for (const auto& s : dataset) any_annotated |= s.cells.has_value();
      if (!any_annotated)
        throw std::runtime_error(
            "masked mode needs cell-annotated samples; regenerate the dataset or "
            "switch to --mask-mode unmasked/oracle-mask");
      DetectHyper dhp = pc.detect;
      dhp.seed = mix_seed(cfg.seed, 0x51);
      dhp.threads = cfg.threads;
      TrainLog det_log, cls_log;
      detector = train_detector(dataset, dhp, &det_log);
      DetectHyper chp = pc.classify;
      chp.seed = dhp.seed;
      chp.threads = cfg.threads;
      classifier = train_classifier(dataset, detector, chp, &cls_log);
      save_checkpoint((fs::path(cfg.checkpoint_path) / "detector.ckpt").string(), detector,
                      dhp.seed);
      save_checkpoint((fs::path(cfg.checkpoint_path) / "classifier.ckpt").string(), classifier,
                      chp.seed);
      save_train_log(det_log, (fs::path(cfg.checkpoint_path) / "detector_loss.csv").string());
      save_train_log(cls_log, (fs::path(cfg.checkpoint_path) / "classifier_loss.csv").string());
      masks = compute_masks(dataset, &detector, &classifier, pc);
      break;
    }
    case MaskMode::OracleMask:
    case MaskMode::Unmasked:
      masks = compute_masks(dataset, nullptr, nullptr, pc);
      break;
  }

  PropHyper php = pc.prop;
  php.seed = mix_seed(cfg.seed, 0x52);
  php.threads = cfg.threads;
  PropTrainLog plog;
  const Model prop = train_proportion(dataset, masks, cfg.loss_mode, php, &plog);
  save_checkpoint((fs::path(cfg.checkpoint_path) / "proportion.ckpt").string(), prop, php.seed);
  save_prop_train_log(plog, (fs::path(cfg.checkpoint_path) / "proportion_loss.csv").string());
  std::cout << "wrote checkpoints to " << cfg.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const auto dataset = load_dataset(cfg.dataset_path);
  const EvalReport report = cross_validate(dataset, cfg.eval_folds, cfg.pipeline());
  fs::create_directories(cfg.output_path);
  save_report_json(report, (fs::path(cfg.output_path) / "report.json").string());
  std::cout << report_table(report);
  return 0;
}

int cmd_plot_losses(const std::string& out) {
  plot_loss_curves(out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_visualize(const RunConfig& cfg, const std::string& sample_id) {
  const auto dataset = load_dataset(cfg.dataset_path);
  const Sample* sample = nullptr;
  for (const auto& s : dataset)
    if (s.id == sample_id) sample = &s;
  if (!sample) throw std::runtime_error("visualize: no sample with id " + sample_id);

  const PipelineConfig pc = cfg.pipeline();
  ImageGrid mask(sample->image.height(), sample->image.width(), 1, 1.0);
  if (cfg.mask_mode == MaskMode::Masked) {
    const Model detector =
        load_checkpoint((fs::path(cfg.checkpoint_path) / "detector.ckpt").string());
    const Model classifier =
        load_checkpoint((fs::path(cfg.checkpoint_path) / "classifier.ckpt").string());
    const auto dets = detect_cells(detector, classifier, sample->image, pc.detect, cfg.threads);
    mask = build_mask(dets, sample->image.height(), sample->image.width(), pc.detect.alpha);
  } else if (cfg.mask_mode == MaskMode::OracleMask) {
    mask = oracle_mask(*sample, pc.detect.alpha);
  }
  const Model prop =
      load_checkpoint((fs::path(cfg.checkpoint_path) / "proportion.ckpt").string());
  const auto est = prop_forward(prop, sample->image, mask, cfg.threads);

  fs::create_directories(cfg.output_path);
  const std::string prefix = (fs::path(cfg.output_path) / sample_id).string();
  save_pnm(sample->image, prefix + "_image.ppm", 16);
  export_visualization(est, prefix);
  std::cout << "r_hat = " << est.r_hat << " (s_p=" << est.s_p << ", s_n=" << est.s_n << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked learning-from-label-proportions pipeline"};
  app.require_subcommand(1);

  Overrides ov;
  bool annotate_all = false;
  std::string plot_out = "loss_curves.csv";
  std::string sample_id;

  auto* gen = app.add_subcommand("generate", "emit a synthetic benchmark dataset");
  add_common_flags(gen, ov);
  gen->add_option("--profile", ov.profile, "easy | imbalanced | distractor");
  gen->add_option("--out", ov.dataset, "dataset directory");
  gen->add_flag("--annotate-all", annotate_all, "keep cell annotations on every sample");

  auto* train = app.add_subcommand("train", "train stage-1 and stage-2 models");
  add_common_flags(train, ov);
  train->add_option("--dataset", ov.dataset, "dataset directory");
  train->add_option("--checkpoints", ov.checkpoints, "checkpoint directory");
  train->add_option("--loss-mode", ov.loss_mode, "Prop | FocalProp | WFL");
  train->add_option("--mask-mode", ov.mask_mode, "masked | unmasked | oracle-mask");

  auto* ev = app.add_subcommand("eval", "cross-validated evaluation");
  add_common_flags(ev, ov);
  ev->add_option("--dataset", ov.dataset, "dataset directory");
  ev->add_option("--out", ov.output, "output directory for report.json");
  ev->add_option("--loss-mode", ov.loss_mode, "Prop | FocalProp | WFL");
  ev->add_option("--mask-mode", ov.mask_mode, "masked | unmasked | oracle-mask");
  ev->add_option("--folds", ov.folds, "number of folds");

  auto* plot = app.add_subcommand("plot-losses", "export loss curves (CSV + PPM)");
  plot->add_option("--out", plot_out, "CSV output path");

  auto* vis = app.add_subcommand("visualize", "export intermediate maps for one sample");
  add_common_flags(vis, ov);
  vis->add_option("--dataset", ov.dataset, "dataset directory");
  vis->add_option("--checkpoints", ov.checkpoints, "checkpoint directory");
  vis->add_option("--out", ov.output, "output directory");
  vis->add_option("--sample", sample_id, "sample id")->required();
  vis->add_option("--mask-mode", ov.mask_mode, "masked | unmasked | oracle-mask");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(resolve_config(ov), annotate_all);
    if (train->parsed()) return cmd_train(resolve_config(ov));
    if (ev->parsed()) return cmd_eval(resolve_config(ov));
    if (plot->parsed()) return cmd_plot_losses(plot_out);
    if (vis->parsed()) return cmd_visualize(resolve_config(ov), sample_id);
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    // configuration and usage mistakes exit 2, runtime failures exit 1
    return msg.rfind("config:", 0) == 0 || msg.rfind("unknown", 0) == 0 ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
