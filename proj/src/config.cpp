#include "mllp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace mllp {

namespace {

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw std::runtime_error("config: unknown key '" + path + key + "'");
}

void get_if(const json& obj, const char* key, double& out) {
  if (obj.contains(key)) out = obj.at(key).get<double>();
}
void get_if(const json& obj, const char* key, int& out) {
  if (obj.contains(key)) out = obj.at(key).get<int>();
}
void get_if(const json& obj, const char* key, std::uint64_t& out) {
  if (obj.contains(key)) out = obj.at(key).get<std::uint64_t>();
}
void get_if(const json& obj, const char* key, bool& out) {
  if (obj.contains(key)) out = obj.at(key).get<bool>();
}
void get_if(const json& obj, const char* key, std::string& out) {
  if (obj.contains(key)) out = obj.at(key).get<std::string>();
}

void parse_stage1(const json& obj, const std::string& path, DetectHyper& hp, bool geometry) {
  std::set<std::string> allowed = {"lr", "batch", "epochs", "momentum"};
  if (geometry) allowed.insert({"sigma", "peak_threshold", "nms_radius", "alpha", "match_radius"});
  check_keys(obj, path, allowed);
  get_if(obj, "lr", hp.lr);
  get_if(obj, "batch", hp.batch);
  get_if(obj, "epochs", hp.epochs);
  get_if(obj, "momentum", hp.momentum);
  if (geometry) {
    get_if(obj, "sigma", hp.sigma);
    get_if(obj, "peak_threshold", hp.peak_threshold);
    get_if(obj, "nms_radius", hp.nms_radius);
    get_if(obj, "alpha", hp.alpha);
    get_if(obj, "match_radius", hp.match_radius);
  }
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::runtime_error(std::string("config: ") + what);
  };
  require(c.threads >= 1, "threads must be >= 1");
  require(c.detector.lr > 0 && c.classifier.lr > 0 && c.proportion.lr > 0, "lr must be > 0");
  require(c.detector.batch >= 1 && c.classifier.batch >= 1 && c.proportion.batch >= 1,
          "batch must be >= 1");
  require(c.detector.epochs >= 0 && c.classifier.epochs >= 0 && c.proportion.epochs >= 0,
          "epochs must be >= 0");
  require(c.detector.sigma > 0, "sigma must be > 0");
  require(c.detector.peak_threshold > 0 && c.detector.peak_threshold < 1,
          "peak_threshold must be in (0,1)");
  require(c.detector.nms_radius >= 1, "nms_radius must be >= 1");
  require(c.detector.alpha > 0, "alpha must be > 0");
  require(c.proportion.patience >= 1, "patience must be >= 1");
  require(c.proportion.downsample == 1 || c.proportion.downsample == 2 ||
              c.proportion.downsample == 4,
          "downsample must be 1, 2, or 4");
  require(c.eval_folds >= 2, "eval folds must be >= 2");
}

}  // namespace

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.detect = detector;
  p.classify = classifier;
  p.classify.sigma = detector.sigma;
  p.classify.peak_threshold = detector.peak_threshold;
  p.classify.nms_radius = detector.nms_radius;
  p.classify.alpha = detector.alpha;
  p.classify.match_radius = detector.match_radius;
  p.prop = proportion;
  p.loss_mode = loss_mode;
  p.mask_mode = mask_mode;
  p.folds = eval_folds;
  p.seed = seed;
  p.threads = threads;
  return p;
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "", {"seed", "threads", "paths", "generator", "detector", "classifier",
                     "proportion", "mask", "loss_mode", "eval"});
  get_if(j, "seed", c.seed);
  get_if(j, "threads", c.threads);
  if (j.contains("paths")) {
    check_keys(j["paths"], "paths.", {"dataset", "output", "checkpoints"});
    get_if(j["paths"], "dataset", c.dataset_path);
    get_if(j["paths"], "output", c.output_path);
    get_if(j["paths"], "checkpoints", c.checkpoint_path);
  }
  if (j.contains("generator")) {
    check_keys(j["generator"], "generator.", {"profile", "seed", "annotate_all"});
    get_if(j["generator"], "profile", c.generator_profile);
    get_if(j["generator"], "seed", c.generator_seed);
    get_if(j["generator"], "annotate_all", c.generator_annotate_all);
    profile_from_name(c.generator_profile);  // reject unknown profiles early
  }
  if (j.contains("detector")) parse_stage1(j["detector"], "detector.", c.detector, true);
  if (j.contains("classifier")) parse_stage1(j["classifier"], "classifier.", c.classifier, false);
  if (j.contains("proportion")) {
    check_keys(j["proportion"], "proportion.",
               {"lr", "batch", "epochs", "patience", "downsample", "momentum"});
    get_if(j["proportion"], "lr", c.proportion.lr);
    get_if(j["proportion"], "batch", c.proportion.batch);
    get_if(j["proportion"], "epochs", c.proportion.epochs);
    get_if(j["proportion"], "patience", c.proportion.patience);
    get_if(j["proportion"], "downsample", c.proportion.downsample);
    get_if(j["proportion"], "momentum", c.proportion.momentum);
  }
  if (j.contains("mask")) {
    check_keys(j["mask"], "mask.", {"mode", "alpha"});
    if (j["mask"].contains("mode"))
      c.mask_mode = mask_mode_from_name(j["mask"]["mode"].get<std::string>());
    get_if(j["mask"], "alpha", c.detector.alpha);
  }
  if (j.contains("loss_mode")) c.loss_mode = loss_mode_from_name(j["loss_mode"].get<std::string>());
  if (j.contains("eval")) {
    check_keys(j["eval"], "eval.", {"folds"});
    get_if(j["eval"], "folds", c.eval_folds);
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

std::string serialize_run_config(const RunConfig& c) {
  json j = {
      {"seed", c.seed},
      {"threads", c.threads},
      {"paths",
       {{"dataset", c.dataset_path}, {"output", c.output_path}, {"checkpoints", c.checkpoint_path}}},
      {"generator",
       {{"profile", c.generator_profile},
        {"seed", c.generator_seed},
        {"annotate_all", c.generator_annotate_all}}},
      {"detector",
       {{"lr", c.detector.lr},
        {"batch", c.detector.batch},
        {"epochs", c.detector.epochs},
        {"momentum", c.detector.momentum},
        {"sigma", c.detector.sigma},
        {"peak_threshold", c.detector.peak_threshold},
        {"nms_radius", c.detector.nms_radius},
        {"match_radius", c.detector.match_radius}}},
      {"classifier",
       {{"lr", c.classifier.lr},
        {"batch", c.classifier.batch},
        {"epochs", c.classifier.epochs},
        {"momentum", c.classifier.momentum}}},
      {"proportion",
       {{"lr", c.proportion.lr},
        {"batch", c.proportion.batch},
        {"epochs", c.proportion.epochs},
        {"patience", c.proportion.patience},
        {"downsample", c.proportion.downsample},
        {"momentum", c.proportion.momentum}}},
      {"mask", {{"mode", mask_mode_name(c.mask_mode)}, {"alpha", c.detector.alpha}}},
      {"loss_mode", loss_mode_name(c.loss_mode)},
      {"eval", {{"folds", c.eval_folds}}},
  };
  return j.dump(1);
}

void apply_env_seed(RunConfig& cfg) {
  if (const char* env = std::getenv("MASKED_LLP_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
    cfg.generator_seed = cfg.seed;
  }
}

}  // namespace mllp
