#ifndef GDMIX_IO_HPP_
#define GDMIX_IO_HPP_

#include <optional>
#include <string>
#include <vector>

#include "gdmix/eval.hpp"
#include "gdmix/hmgd.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Numeric table read from CSV. The header row is optional (detected by
// non-numeric cells); label values may be arbitrary strings and are mapped
// to indices by sorted order.
struct LabeledTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;              // empty when no label column selected
  std::vector<std::string> label_names; // index -> original label string
  std::vector<std::string> columns;     // feature column names
};

// label_column: empty = no labels; otherwise a column name or 0-based index.
LabeledTable read_csv(const std::string& path, const std::string& label_column);

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& row_labels);

// Rows to a unit-scale dataset via zero replacement.
Dataset dataset_from_table(const LabeledTable& table, int class_count = 0);

// Versioned JSON persistence (format v1, kinds "dgd" and "hmgd").
// load(save(m)) is exact and save(load(path)) reproduces the file bytes.
void save_dgd(const DGDModel& model, const std::string& path);
DGDModel load_dgd(const std::string& path);
void save_hmgd(const HMGDTree& tree, const std::string& path);
HMGDTree load_hmgd(const std::string& path);

// Either model kind behind one file; `kind` receives "dgd" or "hmgd".
struct LoadedModel {
  std::string kind;
  DGDModel dgd;
  HMGDTree hmgd;
};
LoadedModel load_model(const std::string& path);

void save_result(const ExperimentResult& result, const std::string& path);
ExperimentResult load_result(const std::string& path);
std::string result_to_json(const ExperimentResult& result);

} // namespace gdmix

#endif // GDMIX_IO_HPP_
