#pragma once

#include <span>
#include <string>
#include <vector>

#include "boba/linalg.hpp"

namespace boba {

/// Row-per-sample features with integer labels in [0, num_classes).
struct LabeledDataset {
  Matrix features;  // samples x dim
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool empty() const { return labels.empty(); }
};

void validate_dataset(const LabeledDataset& data);

LabeledDataset subset(const LabeledDataset& data, std::span<const int> rows);
LabeledDataset concatenate(const std::vector<LabeledDataset>& parts, int num_classes, int dim);

/// One dataset per class, preserving row order within each class.
std::vector<LabeledDataset> split_by_class(const LabeledDataset& data);

/// Empirical label histogram normalised to sum to one.
Vector label_histogram(const LabeledDataset& data);

/// Header `f0,...,f{dim-1},label`, one sample per line.
LabeledDataset load_csv_dataset(const std::string& path, int num_classes = 0);
void save_csv_dataset(const LabeledDataset& data, const std::string& path);

}  // namespace boba
