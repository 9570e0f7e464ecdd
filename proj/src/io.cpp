#include "cpsm/io.hpp"

#include "cpsm/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace cpsm::io {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::string where(const std::string &source, std::size_t line, std::string_view column) {
  return source + ":" + std::to_string(line) + ": column '" + std::string(column) + "'";
}

double parse_double(std::string_view cell, const std::string &context) {
  double v = 0.0;
  const auto *end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw ValidationError(context + ": not a number: '" + std::string(cell) + "'");
  }
  if (!std::isfinite(v)) throw NumericalError(context + ": non-finite value");
  return v;
}

int parse_label(std::string_view cell, const std::string &context) {
  int v = 0;
  const auto *end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 1) {
    throw ValidationError(context + ": label must be an integer >= 1, got '" +
                          std::string(cell) + "'");
  }
  return v;
}

// Index of a `prefix<i>` column (1-based in the header), or -1.
int indexed_column(std::string_view name, char prefix) {
  if (name.size() < 2 || name.front() != prefix) return -1;
  int v = 0;
  const auto *end = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(name.data() + 1, end, v);
  if (ec != std::errc() || ptr != end || v < 1) return -1;
  return v;
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

void check_written(const std::ofstream &out, const std::filesystem::path &path) {
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

LabeledDataset CsvDataset::labeled() const {
  if (!y) throw ValidationError("dataset has no labels");
  LabeledDataset d;
  d.z = z;
  d.x = x;
  d.y = *y;
  d.n_classes = std::max(2, y->size() ? y->maxCoeff() : 2);
  return d;
}

void write_dataset_csv(std::ostream &out, const Matrix &z, const Matrix &x,
                       const Labels *y) {
  if (z.rows() != x.rows() || (y && y->size() != z.rows())) {
    throw ValidationError("row counts of y, z and x differ");
  }
  out << "y";
  for (Eigen::Index j = 0; j < z.cols(); ++j) out << ",z" << j + 1;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (y) out << (*y)(i);
    for (Eigen::Index j = 0; j < z.cols(); ++j) out << ',' << format_double(z(i, j));
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << format_double(x(i, j));
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path &path, const LabeledDataset &d) {
  auto out = open_out(path);
  write_dataset_csv(out, d.z, d.x, &d.y);
  check_written(out, path);
}

void write_dataset_csv(const std::filesystem::path &path, const UnlabeledDataset &d) {
  auto out = open_out(path);
  write_dataset_csv(out, d.z, d.x, nullptr);
  check_written(out, path);
}

CsvDataset read_dataset_csv(std::istream &in, const std::string &source_name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(source_name + ": missing header row");
  }
  const auto header = split(trim(line));
  enum class Kind { Y, Z, X };
  struct Column {
    Kind kind;
    int index;  // 0-based within its block
    std::string name;
  };
  std::vector<Column> columns;
  int y_count = 0, dz = 0, dx = 0;
  for (const auto raw : header) {
    const auto name = trim(raw);
    if (name == "y") {
      columns.push_back({Kind::Y, 0, "y"});
      ++y_count;
    } else if (int zi = indexed_column(name, 'z'); zi > 0) {
      columns.push_back({Kind::Z, zi - 1, std::string(name)});
      dz = std::max(dz, zi);
    } else if (int xi = indexed_column(name, 'x'); xi > 0) {
      columns.push_back({Kind::X, xi - 1, std::string(name)});
      dx = std::max(dx, xi);
    } else {
      throw ValidationError(where(source_name, 1, name) + ": unknown column");
    }
  }
  if (y_count != 1) throw ValidationError(source_name + ": header needs exactly one 'y' column");
  {
    std::vector<int> seen_z(dz, 0), seen_x(dx, 0);
    for (const auto &c : columns) {
      if (c.kind == Kind::Z) ++seen_z[c.index];
      if (c.kind == Kind::X) ++seen_x[c.index];
    }
    for (int j = 0; j < dz; ++j) {
      if (seen_z[j] != 1) {
        throw ValidationError(source_name + ": column z" + std::to_string(j + 1) +
                              (seen_z[j] ? " duplicated" : " missing"));
      }
    }
    for (int j = 0; j < dx; ++j) {
      if (seen_x[j] != 1) {
        throw ValidationError(source_name + ": column x" + std::to_string(j + 1) +
                              (seen_x[j] ? " duplicated" : " missing"));
      }
    }
  }

  std::vector<double> zs, xs;
  std::vector<int> ys;
  std::size_t rows = 0, labeled = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto cells = split(body);
    if (cells.size() != columns.size()) {
      throw ValidationError(source_name + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(columns.size()) + " fields, found " +
                            std::to_string(cells.size()));
    }
    zs.resize(zs.size() + dz);
    xs.resize(xs.size() + dx);
    ys.push_back(0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      const auto &col = columns[c];
      const auto ctx = where(source_name, line_no, col.name);
      switch (col.kind) {
        case Kind::Y:
          if (!cell.empty()) {
            ys.back() = parse_label(cell, ctx);
            ++labeled;
          }
          break;
        case Kind::Z:
          zs[rows * dz + col.index] = parse_double(cell, ctx);
          break;
        case Kind::X:
          xs[rows * dx + col.index] = parse_double(cell, ctx);
          break;
      }
    }
    ++rows;
  }
  if (labeled != 0 && labeled != rows) {
    throw ValidationError(source_name + ": column 'y' is only partially filled (" +
                          std::to_string(labeled) + " of " + std::to_string(rows) +
                          " rows)");
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  CsvDataset out;
  const auto n = static_cast<Eigen::Index>(rows);
  out.z = Eigen::Map<const RowMajor>(zs.data(), n, dz);
  out.x = Eigen::Map<const RowMajor>(xs.data(), n, dx);
  if (labeled) out.y = Eigen::Map<const Labels>(ys.data(), n);
  return out;
}

CsvDataset read_dataset_csv(const std::filesystem::path &path) {
  auto in = open_in(path);
  return read_dataset_csv(in, path.string());
}

void write_labels_csv(const std::filesystem::path &path, const Labels &y) {
  auto out = open_out(path);
  out << "y\n";
  for (Eigen::Index i = 0; i < y.size(); ++i) out << y(i) << '\n';
  check_written(out, path);
}

Labels read_labels_csv(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "y") {
    throw ValidationError(path.string() + ": expected header 'y'");
  }
  std::vector<int> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cell = trim(line);
    if (cell.empty()) continue;
    ys.push_back(parse_label(cell, where(path.string(), line_no, "y")));
  }
  return Eigen::Map<const Labels>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

void write_posterior_csv(std::ostream &out, const PosteriorMatrix &p) {
  for (int k = 0; k < p.n_classes(); ++k) out << (k ? ",p" : "p") << k + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (int k = 0; k < p.n_classes(); ++k) {
      out << (k ? "," : "") << format_double(p.probs(i, k));
    }
    out << '\n';
  }
}

void write_posterior_csv(const std::filesystem::path &path, const PosteriorMatrix &p) {
  auto out = open_out(path);
  write_posterior_csv(out, p);
  check_written(out, path);
}

PosteriorMatrix read_posterior_csv(const std::filesystem::path &path) {
  auto in = open_in(path);
  const std::string name = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(name + ": missing header row");
  const auto header = split(trim(line));
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (trim(header[k]) != "p" + std::to_string(k + 1)) {
      throw ValidationError(where(name, 1, trim(header[k])) + ": expected p" +
                            std::to_string(k + 1));
    }
  }
  const auto k = header.size();
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto cells = split(body);
    if (cells.size() != k) {
      throw ValidationError(name + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(k) + " fields");
    }
    for (std::size_t c = 0; c < k; ++c) {
      values.push_back(parse_double(trim(cells[c]), where(name, line_no, header[c])));
    }
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  PosteriorMatrix p{Eigen::Map<const RowMajor>(
      values.data(), static_cast<Eigen::Index>(values.size() / k),
      static_cast<Eigen::Index>(k))};
  p.validate();
  return p;
}

nlohmann::json to_json(const SoftmaxParams &params) {
  nlohmann::json j;
  j["version"] = kJsonFormatVersion;
  j["n_classes"] = params.n_classes;
  j["n_features"] = params.n_features();
  j["intercepts"] = std::vector<double>(params.intercepts.data(),
                                        params.intercepts.data() + params.intercepts.size());
  auto slopes = nlohmann::json::array();
  for (Eigen::Index r = 0; r < params.slopes.rows(); ++r) {
    std::vector<double> row(params.slopes.cols());
    for (Eigen::Index c = 0; c < params.slopes.cols(); ++c) row[c] = params.slopes(r, c);
    slopes.push_back(row);
  }
  j["slopes"] = slopes;
  return j;
}

SoftmaxParams params_from_json(const nlohmann::json &j) {
  try {
    if (j.at("version").get<int>() != kJsonFormatVersion) {
      throw ValidationError("unsupported model format version");
    }
    const int k = j.at("n_classes").get<int>();
    const int d = j.at("n_features").get<int>();
    SoftmaxParams p = SoftmaxParams::zeros(k, d);
    const auto intercepts = j.at("intercepts").get<std::vector<double>>();
    const auto slopes = j.at("slopes").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(intercepts.size()) != k - 1 ||
        static_cast<int>(slopes.size()) != k - 1) {
      throw ValidationError("model JSON: expected K - 1 intercepts and slope rows");
    }
    for (int r = 0; r < k - 1; ++r) {
      if (static_cast<int>(slopes[r].size()) != d) {
        throw ValidationError("model JSON: slope row " + std::to_string(r) +
                              " has the wrong length");
      }
      p.intercepts(r) = intercepts[r];
      for (int c = 0; c < d; ++c) p.slopes(r, c) = slopes[r][c];
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
}

nlohmann::json to_json(const CpsmFit &fit) {
  nlohmann::json j;
  j["version"] = kJsonFormatVersion;
  j["theta_hat"] = to_json(fit.theta_hat);
  j["loglik_trace"] = fit.loglik_trace;
  j["estimated_prior"] = std::vector<double>(
      fit.estimated_prior.data(), fit.estimated_prior.data() + fit.estimated_prior.size());
  j["iterations_run"] = fit.iterations_run;
  return j;
}

std::string read_file(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &path, const std::string &contents) {
  auto out = open_out(path);
  out << contents;
  check_written(out, path);
}

}  // namespace cpsm::io
