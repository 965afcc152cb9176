#pragma once

#include "fvs/linalg.hpp"

#include <map>
#include <string>
#include <vector>

namespace fvs::dataset {

using linalg::Matrix;
using linalg::Vector;

// RFC-4180-style CSV: header row required, '.' decimal separator, quoted
// fields with doubled quotes.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws if absent
};

Csv read_csv(const std::string& path);
Csv parse_csv(const std::string& text);

struct DatasetSpec {
  std::string csv_path;
  std::string response;
  std::map<std::string, std::string> categorical;  // column -> reference level
  std::vector<std::pair<std::string, std::string>> interactions;
};

// A reference-coded design with the intercept prepended.  Keeps enough
// structure to rebuild the design under different reference levels.
struct BuiltDesign {
  Matrix x;
  Vector y;
  std::vector<std::string> column_names;  // length p, [0] = "(intercept)"
  // Observed levels per categorical column, reference first.
  std::map<std::string, std::vector<std::string>> levels;
};

BuiltDesign build_design(const Csv& csv, const DatasetSpec& spec);

// Rebuilds the design with each categorical's reference level rotated to the
// next observed level: an invertible recoding of the same design space.
BuiltDesign recode_design(const Csv& csv, const DatasetSpec& spec);

}  // namespace fvs::dataset
