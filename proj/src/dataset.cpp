#include "boba/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "boba/error.hpp"

namespace boba {

void validate_dataset(const LabeledDataset& data) {
  require(data.features.rows() == static_cast<Eigen::Index>(data.labels.size()),
          ErrorCode::kInvalidInput, "feature rows and label count differ");
  require(data.num_classes >= 1, ErrorCode::kInvalidInput, "dataset needs num_classes >= 1");
  for (int y : data.labels) {
    require(y >= 0 && y < data.num_classes, ErrorCode::kInvalidInput,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(data.num_classes) + ")");
  }
  require(data.features.allFinite(), ErrorCode::kInvalidInput, "non-finite features");
}

LabeledDataset subset(const LabeledDataset& data, std::span<const int> rows) {
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.reserve(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(rows[r]);
    out.labels.push_back(data.labels[static_cast<size_t>(rows[r])]);
  }
  return out;
}

LabeledDataset concatenate(const std::vector<LabeledDataset>& parts, int num_classes, int dim) {
  LabeledDataset out;
  out.num_classes = num_classes;
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  out.features.resize(total, dim);
  out.labels.reserve(static_cast<size_t>(total));
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    if (p.size() == 0) continue;
    out.features.middleRows(row, p.size()) = p.features;
    row += p.size();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

std::vector<LabeledDataset> split_by_class(const LabeledDataset& data) {
  std::vector<std::vector<int>> rows(static_cast<size_t>(data.num_classes));
  for (int i = 0; i < data.size(); ++i) rows[static_cast<size_t>(data.labels[i])].push_back(i);
  std::vector<LabeledDataset> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(subset(data, r));
  return out;
}

Vector label_histogram(const LabeledDataset& data) {
  Vector h = Vector::Zero(data.num_classes);
  for (int y : data.labels) h(y) += 1.0;
  if (data.size() > 0) h /= static_cast<double>(data.size());
  return h;
}

LabeledDataset load_csv_dataset(const std::string& path, int num_classes) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open dataset '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kInvalidInput,
          "dataset '" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  require(header.size() >= 2 && header.back() == "label", ErrorCode::kInvalidInput,
          "dataset header must be f0,...,f{dim-1},label");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < dim; ++j) {
    require(header[static_cast<size_t>(j)] == "f" + std::to_string(j), ErrorCode::kInvalidInput,
            "unexpected header column '" + header[static_cast<size_t>(j)] + "'");
  }

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col < dim) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        require(res.ec == std::errc() && res.ptr == cell.data() + cell.size(),
                ErrorCode::kInvalidInput, "bad number on line " + std::to_string(line_no));
        values.push_back(v);
      } else {
        int y = 0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), y);
        require(res.ec == std::errc() && res.ptr == cell.data() + cell.size(),
                ErrorCode::kInvalidInput, "bad label on line " + std::to_string(line_no));
        labels.push_back(y);
      }
      ++col;
    }
    require(col == dim + 1, ErrorCode::kInvalidInput,
            "line " + std::to_string(line_no) + " has " + std::to_string(col) + " fields");
  }

  LabeledDataset out;
  out.labels = std::move(labels);
  out.features.resize(static_cast<Eigen::Index>(out.labels.size()), dim);
  for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
    for (int j = 0; j < dim; ++j) out.features(i, j) = values[static_cast<size_t>(i * dim + j)];
  }
  int max_label = -1;
  for (int y : out.labels) max_label = std::max(max_label, y);
  out.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  validate_dataset(out);
  return out;
}

void save_csv_dataset(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write dataset '" + path + "'");
  for (int j = 0; j < data.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[32];
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    out << data.labels[static_cast<size_t>(i)] << '\n';
  }
}

}  // namespace boba
