#include "gdmix/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "gdmix/simplex.hpp"

namespace gdmix {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out = s.substr(b, e - b);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cell.push_back(ch);
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    *out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

ordered_json dgd_to_json(const DGDModel& model) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "dgd";
  doc["C"] = model.class_count;
  doc["D"] = model.gds.empty() ? 0 : model.gds.front().dim();
  doc["A"] = model.scale;
  doc["alphas"] = model.alphas;
  ordered_json shapes = ordered_json::array();
  for (const auto& gd : model.gds) {
    for (const auto& p : gd.shapes) {
      shapes.push_back(ordered_json::array({p[0], p[1]}));
    }
  }
  doc["shapes"] = std::move(shapes);
  return doc;
}

DGDModel dgd_from_json(const ordered_json& doc) {
  const int version = doc.at("schema_version").get<int>();
  if (version > 1) {
    throw IoError("model schema_version " + std::to_string(version) +
                  " is newer than this build supports (1)");
  }
  if (doc.at("kind").get<std::string>() != "dgd") {
    throw IoError("expected kind \"dgd\"");
  }
  DGDModel model;
  model.class_count = doc.at("C").get<int>();
  const int dim = doc.at("D").get<int>();
  model.scale = doc.at("A").get<double>();
  model.alphas = doc.at("alphas").get<std::vector<double>>();
  const auto& shapes = doc.at("shapes");
  if (static_cast<int>(shapes.size()) != model.class_count * dim) {
    throw IoError("shapes should hold C*D pairs");
  }
  model.gds.resize(model.class_count);
  int idx = 0;
  for (int c = 0; c < model.class_count; ++c) {
    model.gds[c].scale = model.scale;
    model.gds[c].shapes.resize(dim);
    for (int d = 0; d < dim; ++d, ++idx) {
      model.gds[c].shapes[d] = {shapes[idx][0].get<double>(),
                                shapes[idx][1].get<double>()};
    }
  }
  return model;
}

ordered_json hmgd_to_json(const HMGDTree& tree) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "hmgd";
  doc["L"] = tree.levels;
  doc["K"] = tree.regions();
  ordered_json m = ordered_json::array();
  for (int i = 0; i < tree.regions(); ++i) m.push_back(tree.subregions(i));
  doc["M"] = std::move(m);
  doc["C"] = tree.class_count;
  doc["D"] = tree.root_gating.gds.front().dim();
  doc["A"] = tree.scale;
  doc["root"] = dgd_to_json(tree.root_gating);
  ordered_json inner = ordered_json::array();
  for (const auto& g : tree.inner_gatings) inner.push_back(dgd_to_json(g));
  doc["inner"] = std::move(inner);
  ordered_json experts = ordered_json::array();
  for (const auto& row : tree.experts) {
    ordered_json leaf = ordered_json::array();
    for (const auto& e : row) leaf.push_back(dgd_to_json(e));
    experts.push_back(std::move(leaf));
  }
  doc["experts"] = std::move(experts);
  return doc;
}

HMGDTree hmgd_from_json(const ordered_json& doc) {
  const int version = doc.at("schema_version").get<int>();
  if (version > 1) {
    throw IoError("model schema_version " + std::to_string(version) +
                  " is newer than this build supports (1)");
  }
  if (doc.at("kind").get<std::string>() != "hmgd") {
    throw IoError("expected kind \"hmgd\"");
  }
  HMGDTree tree;
  tree.levels = doc.at("L").get<int>();
  tree.class_count = doc.at("C").get<int>();
  tree.scale = doc.at("A").get<double>();
  tree.root_gating = dgd_from_json(doc.at("root"));
  for (const auto& g : doc.at("inner")) {
    tree.inner_gatings.push_back(dgd_from_json(g));
  }
  for (const auto& row : doc.at("experts")) {
    std::vector<DGDModel> leaf;
    for (const auto& e : row) leaf.push_back(dgd_from_json(e));
    tree.experts.push_back(std::move(leaf));
  }
  return tree;
}

std::string dump(const ordered_json& doc) { return doc.dump(2) + "\n"; }

} // namespace

LabeledTable read_csv(const std::string& path, const std::string& label_column) {
  const std::string content = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(content);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw IoError("empty CSV: " + path);
  const std::size_t cols = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw IoError("row " + std::to_string(r + 1) + " has " +
                    std::to_string(rows[r].size()) + " cells, expected " +
                    std::to_string(cols));
    }
  }

  // Header iff some first-row cell is non-numeric while the same cell of the
  // second row is numeric (string-label columns fail in both).
  bool header = false;
  if (rows.size() > 1) {
    for (std::size_t c = 0; c < cols; ++c) {
      double x = 0.0;
      if (!parse_double(rows[0][c], &x) && parse_double(rows[1][c], &x)) {
        header = true;
        break;
      }
    }
  }

  std::vector<std::string> names(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    names[c] = header ? rows[0][c] : "c" + std::to_string(c);
  }
  const std::size_t first_data = header ? 1 : 0;

  int label_idx = -1;
  if (!label_column.empty()) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (names[c] == label_column) {
        label_idx = static_cast<int>(c);
        break;
      }
    }
    if (label_idx < 0) {
      try {
        std::size_t pos = 0;
        const int idx = std::stoi(label_column, &pos);
        if (pos == label_column.size() && idx >= 0 &&
            idx < static_cast<int>(cols)) {
          label_idx = idx;
        }
      } catch (...) {
      }
    }
    if (label_idx < 0) {
      throw IoError("label column '" + label_column + "' not found");
    }
  }

  LabeledTable table;
  for (std::size_t c = 0; c < cols; ++c) {
    if (static_cast<int>(c) != label_idx) table.columns.push_back(names[c]);
  }

  std::vector<std::string> raw_labels;
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    std::vector<double> row;
    row.reserve(cols - (label_idx >= 0 ? 1 : 0));
    for (std::size_t c = 0; c < cols; ++c) {
      if (static_cast<int>(c) == label_idx) {
        raw_labels.push_back(rows[r][c]);
        continue;
      }
      double x = 0.0;
      if (!parse_double(rows[r][c], &x)) {
        throw IoError("row " + std::to_string(r + 1) + " column '" + names[c] +
                      "': cannot parse '" + rows[r][c] + "' as a number");
      }
      row.push_back(x);
    }
    table.rows.push_back(std::move(row));
  }

  if (label_idx >= 0) {
    // Distinct labels sorted (numerically when they all parse as numbers).
    std::vector<std::string> uniq(raw_labels);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    bool numeric = true;
    for (const auto& s : uniq) {
      double x = 0.0;
      numeric = numeric && parse_double(s, &x);
    }
    if (numeric) {
      std::sort(uniq.begin(), uniq.end(), [](const auto& a, const auto& b) {
        return std::stod(a) < std::stod(b);
      });
    }
    table.label_names = uniq;
    for (const auto& s : raw_labels) {
      const auto it = std::lower_bound(
          uniq.begin(), uniq.end(), s, [&](const auto& a, const auto& b) {
            if (numeric) return std::stod(a) < std::stod(b);
            return a < b;
          });
      table.labels.push_back(static_cast<int>(it - uniq.begin()));
    }
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& row_labels) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) out << ',';
    out << columns[c];
  }
  if (!row_labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) out << ',';
      out << rows[r][c];
    }
    if (!row_labels.empty()) out << ',' << row_labels[r];
    out << '\n';
  }
  write_file(path, out.str());
}

Dataset dataset_from_table(const LabeledTable& table, int class_count) {
  Dataset data;
  data.feature_names = table.columns;
  if (!table.labels.empty()) {
    int top = 0;
    for (int y : table.labels) top = std::max(top, y);
    data.class_count = class_count > 0 ? class_count : top + 1;
  } else {
    data.class_count = class_count;
  }
  data.samples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    CompositionalSample s = zero_replace(table.rows[r], 1.0);
    if (!table.labels.empty()) s.label = table.labels[r];
    data.samples.push_back(std::move(s));
  }
  data.check_consistent();
  return data;
}

void save_dgd(const DGDModel& model, const std::string& path) {
  write_file(path, dump(dgd_to_json(model)));
}

DGDModel load_dgd(const std::string& path) {
  return dgd_from_json(ordered_json::parse(read_file(path)));
}

void save_hmgd(const HMGDTree& tree, const std::string& path) {
  write_file(path, dump(hmgd_to_json(tree)));
}

HMGDTree load_hmgd(const std::string& path) {
  return hmgd_from_json(ordered_json::parse(read_file(path)));
}

LoadedModel load_model(const std::string& path) {
  const ordered_json doc = ordered_json::parse(read_file(path));
  LoadedModel out;
  out.kind = doc.at("kind").get<std::string>();
  if (out.kind == "dgd") {
    out.dgd = dgd_from_json(doc);
  } else if (out.kind == "hmgd") {
    out.hmgd = hmgd_from_json(doc);
  } else {
    throw IoError("unknown model kind: " + out.kind);
  }
  return out;
}

std::string result_to_json(const ExperimentResult& result) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "experiment";
  doc["model_kind"] = to_string(result.kind);
  doc["folds"] = result.folds;
  doc["seed"] = result.seed;
  doc["structure"] = {{"K", result.structure.regions},
                      {"M", result.structure.subregions}};
  doc["fold_accuracy"] = result.fold_accuracy;
  doc["fold_mcc"] = result.fold_mcc;
  doc["accuracy_mean"] = result.accuracy_mean;
  doc["accuracy_sd"] = result.accuracy_sd;
  doc["mcc_mean"] = result.mcc_mean;
  doc["mcc_sd"] = result.mcc_sd;
  doc["wall_clock_seconds"] = result.wall_clock_seconds;
  return dump(doc);
}

void save_result(const ExperimentResult& result, const std::string& path) {
  write_file(path, result_to_json(result));
}

ExperimentResult load_result(const std::string& path) {
  const ordered_json doc = ordered_json::parse(read_file(path));
  const int version = doc.at("schema_version").get<int>();
  if (version > 1) {
    throw IoError("result schema_version " + std::to_string(version) +
                  " is newer than this build supports (1)");
  }
  ExperimentResult r;
  r.kind = model_kind_from_string(doc.at("model_kind").get<std::string>());
  r.folds = doc.at("folds").get<int>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.structure.regions = doc.at("structure").at("K").get<int>();
  r.structure.subregions =
      doc.at("structure").at("M").get<std::vector<int>>();
  r.fold_accuracy = doc.at("fold_accuracy").get<std::vector<double>>();
  r.fold_mcc = doc.at("fold_mcc").get<std::vector<double>>();
  r.accuracy_mean = doc.at("accuracy_mean").get<double>();
  r.accuracy_sd = doc.at("accuracy_sd").get<double>();
  r.mcc_mean = doc.at("mcc_mean").get<double>();
  r.mcc_sd = doc.at("mcc_sd").get<double>();
  r.wall_clock_seconds = doc.at("wall_clock_seconds").get<double>();
  return r;
}

} // namespace gdmix
