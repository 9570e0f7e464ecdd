#include "cpsm/error.hpp"
#include "cpsm/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

namespace cpsm {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cpsm_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::string expect_validation(const std::string &csv) {
  std::istringstream in(csv);
  try {
    io::read_dataset_csv(in, "data.csv");
  } catch (const ValidationError &e) {
    return e.what();
  }
  ADD_FAILURE() << "no ValidationError for:\n" << csv;
  return {};
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(-2.5), "-2.5");
  EXPECT_EQ(io::format_double(1.0), "1");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 40 - 20);
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
}

TEST_F(TempDir, LabeledDatasetRoundTrip) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1e3);
  LabeledDataset d;
  d.z = Matrix(25, 3);
  d.x = Matrix(25, 4);
  d.y = Labels(25);
  for (int i = 0; i < 25; ++i) {
    for (int j = 0; j < 3; ++j) d.z(i, j) = normal(rng);
    for (int j = 0; j < 4; ++j) d.x(i, j) = normal(rng) * 1e-7;
    d.y(i) = 1 + i % 2;
  }
  d.x(0, 0) = std::numeric_limits<double>::denorm_min();
  d.x(1, 1) = std::numeric_limits<double>::max();
  io::write_dataset_csv(dir_ / "d.csv", d);
  const auto back = io::read_dataset_csv(dir_ / "d.csv");
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.x, d.x);
  ASSERT_TRUE(back.y.has_value());
  EXPECT_EQ(*back.y, d.y);
  EXPECT_EQ(back.labeled().n_classes, 2);
}

TEST_F(TempDir, UnlabeledDatasetHasEmptyLabelCells) {
  UnlabeledDataset d{Matrix::Constant(3, 1, 0.5), Matrix::Constant(3, 2, -1.25)};
  io::write_dataset_csv(dir_ / "t.csv", d);
  const std::string text = io::read_file(dir_ / "t.csv");
  EXPECT_EQ(text, "y,z1,x1,x2\n,0.5,-1.25,-1.25\n,0.5,-1.25,-1.25\n,0.5,-1.25,-1.25\n");
  const auto back = io::read_dataset_csv(dir_ / "t.csv");
  EXPECT_FALSE(back.y.has_value());
  EXPECT_EQ(back.unlabeled().x, d.x);
  EXPECT_THROW(back.labeled(), ValidationError);
}

TEST(ReadDatasetCsv, ColumnsInAnyOrder) {
  std::istringstream in("x2,z1,y,x1\n4,1,2,3\n8,0,1,7\n");
  const auto d = io::read_dataset_csv(in);
  Matrix x(2, 2);
  x << 3, 4, 7, 8;
  EXPECT_EQ(d.x, x);
  EXPECT_EQ(d.z(0, 0), 1.0);
  EXPECT_EQ((*d.y)(1), 1);
}

TEST(ReadDatasetCsv, ToleratesCrlfAndBlankLines) {
  std::istringstream in("y,x1\r\n1,0.5\r\n\r\n2,1.5\r\n");
  const auto d = io::read_dataset_csv(in);
  EXPECT_EQ(d.x.rows(), 2);
  EXPECT_EQ(d.z.cols(), 0);
}

TEST(ReadDatasetCsv, Diagnostics) {
  EXPECT_NE(expect_validation("y,z1,w1\n1,0,0\n").find("data.csv:1: column 'w1'"), std::string::npos);
  EXPECT_NE(expect_validation("y,z2,x1\n1,0,0\n").find("column z1 missing"), std::string::npos);
  EXPECT_NE(expect_validation("y,x1,x1\n1,0,0\n").find("column x1 duplicated"), std::string::npos);
  EXPECT_NE(expect_validation("z1,x1\n0,0\n").find("exactly one 'y'"), std::string::npos);
  EXPECT_NE(expect_validation("y,x1\n1,0\n2\n").find("data.csv:3: expected 2 fields, found 1"),
            std::string::npos);
  EXPECT_NE(expect_validation("y,x1\n1,0\n2,abc\n").find("data.csv:3: column 'x1': not a number"),
            std::string::npos);
  EXPECT_NE(expect_validation("y,x1\n1,0\n,1\n").find("partially filled"), std::string::npos);
  EXPECT_NE(expect_validation("y,x1\n0,0\n").find("label must be an integer"), std::string::npos);
  EXPECT_NE(expect_validation("").find("missing header"), std::string::npos);
}

TEST(ReadDatasetCsv, NonFiniteIsNumericalError) {
  for (const char *bad : {"nan", "inf", "-inf", "1e999"}) {
    std::istringstream in(std::string("y,x1\n1,") + bad + "\n");
    EXPECT_THROW(io::read_dataset_csv(in), Error) << bad;
  }
  std::istringstream in("y,x1\n1,nan\n");
  EXPECT_THROW(io::read_dataset_csv(in), NumericalError);
}

TEST(ReadDatasetCsv, MissingFileIsIoError) {
  EXPECT_THROW(io::read_dataset_csv(fs::path("/nonexistent/dir/file.csv")), IoError);
}

TEST_F(TempDir, LabelsRoundTrip) {
  Labels y(4);
  y << 1, 2, 2, 1;
  io::write_labels_csv(dir_ / "y.csv", y);
  EXPECT_EQ(io::read_file(dir_ / "y.csv"), "y\n1\n2\n2\n1\n");
  EXPECT_EQ(io::read_labels_csv(dir_ / "y.csv"), y);
}

TEST_F(TempDir, PosteriorRoundTrip) {
  PosteriorMatrix p{Matrix(2, 3)};
  p.probs << 0.2, 0.3, 0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  io::write_posterior_csv(dir_ / "p.csv", p);
  EXPECT_EQ(io::read_file(dir_ / "p.csv").substr(0, 9), "p1,p2,p3\n");
  EXPECT_EQ(io::read_posterior_csv(dir_ / "p.csv").probs, p.probs);
  io::write_file(dir_ / "bad.csv", "p1,q2\n0.5,0.5\n");
  EXPECT_THROW(io::read_posterior_csv(dir_ / "bad.csv"), ValidationError);
}

TEST(ParamsJson, RoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int k = 2; k <= 4; ++k) {
    for (int d = 0; d <= 3; ++d) {
      SoftmaxParams p = SoftmaxParams::zeros(k, d);
      for (int c = 0; c < k - 1; ++c) {
        p.intercepts(c) = normal(rng);
        for (int j = 0; j < d; ++j) p.slopes(c, j) = normal(rng);
      }
      const auto j = io::to_json(p);
      EXPECT_EQ(j.at("n_classes"), k);
      EXPECT_EQ(j.at("n_features"), d);
      EXPECT_EQ(io::params_from_json(nlohmann::json::parse(j.dump())), p);
    }
  }
}

TEST(ParamsJson, RejectsMalformedDocuments) {
  auto j = io::to_json(SoftmaxParams::zeros(3, 2));
  auto bad_version = j;
  bad_version["version"] = 99;
  EXPECT_THROW(io::params_from_json(bad_version), ValidationError);
  auto short_rows = j;
  short_rows["slopes"] = nlohmann::json::array({nlohmann::json::array({0.0, 0.0})});
  EXPECT_THROW(io::params_from_json(short_rows), ValidationError);
  auto wrong_type = j;
  wrong_type["intercepts"] = "zero";
  EXPECT_THROW(io::params_from_json(wrong_type), ValidationError);
}

TEST(FitJson, CarriesTraceAndPrior) {
  CpsmFit fit;
  fit.theta_hat = SoftmaxParams::zeros(2, 1);
  fit.loglik_trace = {0.0, 1.5, 1.75};
  fit.estimated_prior = Vector(2);
  fit.estimated_prior << 0.25, 0.75;
  fit.iterations_run = 2;
  const auto j = io::to_json(fit);
  EXPECT_EQ(j.at("loglik_trace").get<std::vector<double>>(), fit.loglik_trace);
  EXPECT_EQ(j.at("estimated_prior").get<std::vector<double>>(), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(j.at("iterations_run"), 2);
  EXPECT_EQ(io::params_from_json(j.at("theta_hat")), fit.theta_hat);
}

}  // namespace
}  // namespace cpsm
