#include "fvs/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fvs::dataset {

namespace {

std::vector<std::string> split_record(const std::string& line, size_t lineno) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) {
    throw std::invalid_argument("csv: unterminated quote on line " +
                                std::to_string(lineno));
  }
  fields.push_back(field);
  return fields;
}

double parse_number(const std::string& cell, size_t row, const std::string& col) {
  try {
    size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("csv: cell at data row " + std::to_string(row + 1) +
                                ", column '" + col + "' is not numeric: '" +
                                cell + "'");
  }
}

struct ColumnBlock {
  std::vector<std::string> names;
  Matrix values;  // n x block width
};

// Expands one source column: a numeric column is itself; a categorical
// column becomes reference-coded dummies over its observed levels.
ColumnBlock expand_column(const Csv& csv, const std::string& name,
                          const std::map<std::string, std::vector<std::string>>& levels) {
  const int ci = csv.column(name);
  const auto n = static_cast<linalg::Index>(csv.rows.size());
  ColumnBlock block;
  const auto lv = levels.find(name);
  if (lv == levels.end()) {
    block.values.resize(n, 1);
    block.names.push_back(name);
    for (linalg::Index i = 0; i < n; ++i) {
      block.values(i, 0) = parse_number(csv.rows[i][ci], i, name);
    }
    return block;
  }
  const auto& lvl = lv->second;  // reference first
  block.values = Matrix::Zero(n, static_cast<linalg::Index>(lvl.size()) - 1);
  for (size_t j = 1; j < lvl.size(); ++j) {
    block.names.push_back(name + "=" + lvl[j]);
  }
  for (linalg::Index i = 0; i < n; ++i) {
    const std::string& cell = csv.rows[i][ci];
    const auto it = std::find(lvl.begin(), lvl.end(), cell);
    if (it == lvl.end()) {
      throw std::invalid_argument("csv: unknown level '" + cell +
                                  "' for categorical '" + name + "' at row " +
                                  std::to_string(i + 1));
    }
    const auto j = static_cast<linalg::Index>(it - lvl.begin());
    if (j > 0) block.values(i, j - 1) = 1.0;
  }
  return block;
}

BuiltDesign assemble(const Csv& csv, const DatasetSpec& spec,
                     const std::map<std::string, std::vector<std::string>>& levels) {
  const auto n = static_cast<linalg::Index>(csv.rows.size());
  if (n == 0) throw std::invalid_argument("csv: no data rows");

  std::vector<ColumnBlock> blocks;
  std::vector<std::string> predictors;
  for (const auto& name : csv.header) {
    if (name == spec.response) continue;
    predictors.push_back(name);
    blocks.push_back(expand_column(csv, name, levels));
  }
  for (const auto& [a, b] : spec.interactions) {
    const ColumnBlock ba = expand_column(csv, a, levels);
    const ColumnBlock bb = expand_column(csv, b, levels);
    ColumnBlock cross;
    cross.values.resize(n, ba.values.cols() * bb.values.cols());
    linalg::Index c = 0;
    for (linalg::Index i = 0; i < ba.values.cols(); ++i) {
      for (linalg::Index j = 0; j < bb.values.cols(); ++j) {
        cross.values.col(c) =
            ba.values.col(i).cwiseProduct(bb.values.col(j));
        cross.names.push_back(ba.names[i] + ":" + bb.names[j]);
        ++c;
      }
    }
    blocks.push_back(std::move(cross));
  }

  linalg::Index p = 1;
  for (const auto& b : blocks) p += b.values.cols();

  BuiltDesign out;
  out.levels = levels;
  out.x.resize(n, p);
  out.x.col(0).setOnes();
  out.column_names.push_back("(intercept)");
  linalg::Index col = 1;
  for (const auto& b : blocks) {
    out.x.block(0, col, n, b.values.cols()) = b.values;
    out.column_names.insert(out.column_names.end(), b.names.begin(),
                            b.names.end());
    col += b.values.cols();
  }

  const int yi = csv.column(spec.response);
  out.y.resize(n);
  for (linalg::Index i = 0; i < n; ++i) {
    out.y(i) = parse_number(csv.rows[i][yi], i, spec.response);
  }
  return out;
}

std::map<std::string, std::vector<std::string>> observed_levels(
    const Csv& csv, const DatasetSpec& spec) {
  std::map<std::string, std::vector<std::string>> levels;
  for (const auto& [name, ref] : spec.categorical) {
    const int ci = csv.column(name);
    std::set<std::string> seen;
    for (const auto& row : csv.rows) seen.insert(row[ci]);
    if (!seen.count(ref)) {
      throw std::invalid_argument("categorical '" + name +
                                  "': declared reference level '" + ref +
                                  "' never occurs in the data");
    }
    std::vector<std::string> ordered;
    ordered.push_back(ref);
    for (const auto& l : seen) {
      if (l != ref) ordered.push_back(l);
    }
    if (ordered.size() < 2) {
      throw std::invalid_argument("categorical '" + name +
                                  "' has a single level");
    }
    levels[name] = std::move(ordered);
  }
  return levels;
}

}  // namespace

int Csv::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("csv: no column named '" + name + "'");
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_record(line, lineno);
    if (csv.header.empty()) {
      csv.header = std::move(fields);
    } else {
      if (fields.size() != csv.header.size()) {
        throw std::invalid_argument(
            "csv: line " + std::to_string(lineno) + " has " +
            std::to_string(fields.size()) + " fields, expected " +
            std::to_string(csv.header.size()));
      }
      csv.rows.push_back(std::move(fields));
    }
  }
  if (csv.header.empty()) throw std::invalid_argument("csv: missing header");
  return csv;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

BuiltDesign build_design(const Csv& csv, const DatasetSpec& spec) {
  (void)csv.column(spec.response);
  return assemble(csv, spec, observed_levels(csv, spec));
}

BuiltDesign recode_design(const Csv& csv, const DatasetSpec& spec) {
  auto levels = observed_levels(csv, spec);
  for (auto& [name, lvl] : levels) {
    // Rotate: the second observed level becomes the reference.
    std::rotate(lvl.begin(), lvl.begin() + 1, lvl.end());
  }
  return assemble(csv, spec, levels);
}

}  // namespace fvs::dataset
