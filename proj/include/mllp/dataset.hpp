#ifndef MLLP_DATASET_HPP_
#define MLLP_DATASET_HPP_

#include <optional>
#include <string>
#include <vector>

#include "mllp/grid.hpp"
#include "mllp/intervals.hpp"

namespace mllp {

enum class CellClass { PosTumor = 0, NegTumor, NonTumor };

std::string cell_class_name(CellClass c);
CellClass cell_class_from_name(const std::string& name);

/// Ground-truth cell: position within the grid plus one of three classes.
struct CellRecord {
  int row = 0;
  int col = 0;
  CellClass cls = CellClass::NonTumor;
};

/// One core image with its labels. Cell annotations are present only for
/// the detection-annotated subset. true_r is synthetic ground truth kept
/// for evaluation and oracles; training sees only the interval.
struct Sample {
  std::string id;
  ImageGrid image;
  std::optional<std::vector<CellRecord>> cells;
  IntervalId interval = IntervalId::I0_1;
  double true_r = 0.0;
};

/// Tumor-proportion from an annotation list: |PosTumor| / (|PosTumor|+|NegTumor|).
double annotated_proportion(const std::vector<CellRecord>& cells);

/// Reads a dataset directory (manifest.json + per-sample image/annotation
/// files), validating every invariant. Throws std::runtime_error naming
/// the offending sample on any inconsistency.
std::vector<Sample> load_dataset(const std::string& dir);

/// Writes the dataset directory format read by load_dataset.
void save_dataset(const std::string& dir, const std::vector<Sample>& samples);

}  // namespace mllp

#endif  // MLLP_DATASET_HPP_
