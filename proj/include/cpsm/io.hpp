#pragma once

#include "cpsm/em.hpp"
#include "cpsm/softmax.hpp"
#include "cpsm/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace cpsm::io {

inline constexpr int kJsonFormatVersion = 1;

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Contents of a dataset CSV (`y,z1..zdz,x1..xdx`). `y` is absent when every
/// label cell is empty, as in target files.
struct CsvDataset {
  Matrix z;
  Matrix x;
  std::optional<Labels> y;

  /// Labeled view; n_classes is the largest label, at least 2. Throws
  /// ValidationError when labels are missing.
  LabeledDataset labeled() const;
  UnlabeledDataset unlabeled() const { return {z, x}; }
};

void write_dataset_csv(std::ostream &out, const Matrix &z, const Matrix &x,
                       const Labels *y);
void write_dataset_csv(const std::filesystem::path &path, const LabeledDataset &d);
/// Target layout: same header, empty label cells.
void write_dataset_csv(const std::filesystem::path &path, const UnlabeledDataset &d);

/// Parses a dataset CSV. Columns may appear in any order; unknown columns,
/// duplicate columns, ragged rows, non-numeric cells and a partially empty
/// `y` column are ValidationErrors carrying the line number and column name.
CsvDataset read_dataset_csv(std::istream &in, const std::string &source_name = "<stream>");
CsvDataset read_dataset_csv(const std::filesystem::path &path);

/// Single-column `y` file holding evaluation-only target labels.
void write_labels_csv(const std::filesystem::path &path, const Labels &y);
Labels read_labels_csv(const std::filesystem::path &path);

/// Header `p1..pK`, one row per sample.
void write_posterior_csv(std::ostream &out, const PosteriorMatrix &p);
void write_posterior_csv(const std::filesystem::path &path, const PosteriorMatrix &p);
PosteriorMatrix read_posterior_csv(const std::filesystem::path &path);

nlohmann::json to_json(const SoftmaxParams &params);
SoftmaxParams params_from_json(const nlohmann::json &j);

/// theta_hat, loglik_trace, estimated_prior and iterations_run; the target
/// posterior travels separately as CSV.
nlohmann::json to_json(const CpsmFit &fit);

/// Reads a whole file; throws IoError if it cannot be opened.
std::string read_file(const std::filesystem::path &path);
/// Truncates and writes; throws IoError on failure.
void write_file(const std::filesystem::path &path, const std::string &contents);

}  // namespace cpsm::io
