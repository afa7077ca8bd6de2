#include "mllp/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mllp {

std::string cell_class_name(CellClass c) {
  switch (c) {
    case CellClass::PosTumor: return "pos_tumor";
    case CellClass::NegTumor: return "neg_tumor";
    case CellClass::NonTumor: return "non_tumor";
  }
  throw std::logic_error("cell_class_name: bad class");
}

CellClass cell_class_from_name(const std::string& name) {
  if (name == "pos_tumor") return CellClass::PosTumor;
  if (name == "neg_tumor") return CellClass::NegTumor;
  if (name == "non_tumor") return CellClass::NonTumor;
  throw std::runtime_error("unknown cell class: " + name);
}

double annotated_proportion(const std::vector<CellRecord>& cells) {
  int pos = 0, neg = 0;
  for (const auto& c : cells) {
    if (c.cls == CellClass::PosTumor) ++pos;
    if (c.cls == CellClass::NegTumor) ++neg;
  }
  if (pos + neg == 0) return 0.0;
  return static_cast<double>(pos) / (pos + neg);
}

namespace {

json read_json_file(const fs::path& p, const std::string& sample_id) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("dataset: missing file " + p.string() +
                                   (sample_id.empty() ? "" : " (sample " + sample_id + ")"));
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("dataset: malformed JSON in " + p.string() + ": " + e.what());
  }
  return j;
}

void validate_sample(const Sample& s) {
  if (!s.image.all_finite() || s.image.min_value() < 0.0 || s.image.max_value() > 1.0)
    throw std::runtime_error("dataset: image values outside [0,1] in sample " + s.id);
  if (!(s.true_r >= 0.0 && s.true_r <= 1.0))
    throw std::runtime_error("dataset: true_r outside [0,1] in sample " + s.id);
  if (interval_of(s.true_r) != s.interval)
    throw std::runtime_error("dataset: interval mismatch in sample " + s.id +
                             " (true_r does not fall in the stored bucket)");
  if (s.cells) {
    for (const auto& c : *s.cells)
      if (!s.image.in_bounds(c.row, c.col))
        throw std::runtime_error("dataset: cell out of bounds in sample " + s.id);
    int pos = 0, neg = 0;
    for (const auto& c : *s.cells) {
      if (c.cls == CellClass::PosTumor) ++pos;
      if (c.cls == CellClass::NegTumor) ++neg;
    }
    if (pos + neg > 0 && annotated_proportion(*s.cells) != s.true_r)
      throw std::runtime_error("dataset: true_r does not match annotated cells in sample " + s.id);
  }
}

}  // namespace

std::vector<Sample> load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const json manifest = read_json_file(root / "manifest.json", "");
  if (!manifest.is_array())
    throw std::runtime_error("dataset: manifest.json must be an array");
  std::vector<Sample> out;
  out.reserve(manifest.size());
  for (const auto& entry : manifest) {
    Sample s;
    try {
      s.id = entry.at("id").get<std::string>();
      s.interval = interval_from_name(entry.at("interval").get<std::string>());
      s.true_r = entry.at("true_r").get<double>();
      s.image = load_pnm((root / entry.at("image").get<std::string>()).string());
      if (!entry.at("annotations").is_null()) {
        const json ann = read_json_file(root / entry["annotations"].get<std::string>(), s.id);
        std::vector<CellRecord> cells;
        for (const auto& c : ann.at("cells")) {
          cells.push_back({c.at("row").get<int>(), c.at("col").get<int>(),
                           cell_class_from_name(c.at("class").get<std::string>())});
        }
        s.cells = std::move(cells);
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset: malformed manifest entry" +
                               (s.id.empty() ? std::string() : " for sample " + s.id) + ": " +
                               e.what());
    }
    validate_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::string& dir, const std::vector<Sample>& samples) {
  const fs::path root(dir);
  fs::create_directories(root);
  json manifest = json::array();
  for (const auto& s : samples) {
    const std::string img_name = s.id + ".ppm";
    save_pnm(s.image, (root / img_name).string(), 16);
    json entry = {{"id", s.id},
                  {"image", img_name},
                  {"interval", interval_name(s.interval)},
                  {"true_r", s.true_r},
                  {"annotations", nullptr}};
    if (s.cells) {
      const std::string ann_name = s.id + ".cells.json";
      json cells = json::array();
      for (const auto& c : *s.cells)
        cells.push_back({{"row", c.row}, {"col", c.col}, {"class", cell_class_name(c.cls)}});
      std::ofstream f(root / ann_name);
      if (!f) throw std::runtime_error("dataset: cannot write " + ann_name);
      f << json{{"cells", cells}}.dump(1) << "\n";
      entry["annotations"] = ann_name;
    }
    manifest.push_back(std::move(entry));
  }
  std::ofstream f(root / "manifest.json");
  if (!f) throw std::runtime_error("dataset: cannot write manifest.json");
  f << manifest.dump(1) << "\n";
}

}  // namespace mllp
