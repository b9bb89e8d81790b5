#include "stwarp/data.hpp"
#include "stwarp/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using namespace stwarp;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "stwarp_test_data";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const auto p = scratch(name);
  std::ofstream(p) << body;
  return p;
}

Dataset grid_dataset(std::size_t nx, std::size_t nt) {
  std::vector<SpaceTimePoint> pts;
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t j = 0; j < nx; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        pts.push_back({static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)});
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(pts.size()), 0.0, 1.0);
  return make_dataset(std::move(pts), std::move(z));
}

}  // namespace

TEST(Data, LoadsMinimalFile) {
  const auto p = write_file("min.csv", "s1,s2,t,z\n0,0,0,1.5\n1,0,0,2\n0,1,0.5,-3\n");
  const auto d = load_dataset(p);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.covariate_count(), 0u);
  EXPECT_EQ(d.points[2], (SpaceTimePoint{0, 1, 0.5}));
  EXPECT_DOUBLE_EQ(d.z[2], -3.0);
}

TEST(Data, LoadsCovariateColumn) {
  const auto p = write_file("cov.csv", "z,t,x1,s2,s1\n1,0,7,0,0\n2,0,8,0,1\n3,1,9,0,0\n");
  const auto d = load_dataset(p);
  ASSERT_EQ(d.covariate_count(), 1u);
  EXPECT_EQ(d.covariate_names[0], "x1");
  EXPECT_DOUBLE_EQ(d.x(1, 0), 8.0);
  EXPECT_DOUBLE_EQ(d.points[1].s1, 1.0);
}

TEST(Data, DuplicateCoordinatesNameTheRow) {
  const auto p = write_file("dup.csv", "s1,s2,t,z\n0,0,0,1\n1,0,0,2\n0,0,0,3\n");
  try {
    load_dataset(p);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Data, MissingColumnAndNonNumericCell) {
  EXPECT_THROW(load_dataset(write_file("miss.csv", "s1,s2,z\n0,0,1\n")), DataError);
  try {
    load_dataset(write_file("nan.csv", "s1,s2,t,z\n0,0,0,1\n0,1,0,abc\n"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Data, CustomSchemaAndDelimiter) {
  const auto p = write_file("semi.csv", "lon;lat;day;obs;elev\n1;2;3;4;5\n");
  CsvSchema schema;
  schema.s1 = "lon";
  schema.s2 = "lat";
  schema.t = "day";
  schema.z = "obs";
  schema.covariates = {"elev"};
  schema.delimiter = ';';
  const auto d = load_dataset(p, schema);
  EXPECT_EQ(d.points[0], (SpaceTimePoint{1, 2, 3}));
  EXPECT_DOUBLE_EQ(d.x(0, 0), 5.0);
}

TEST(Data, SaveLoadRoundTripIsBitIdentical) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<SpaceTimePoint> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({nd(rng) * 1e-7, nd(rng) * 1e5, nd(rng)});
  Eigen::VectorXd z(200);
  Eigen::MatrixXd x(200, 2);
  for (int i = 0; i < 200; ++i) {
    z[i] = nd(rng) / 3.0;
    x(i, 0) = 1.0 / (i + 1.0);
    x(i, 1) = nd(rng);
  }
  const auto d = make_dataset(pts, z, x, {"x1", "x2"});
  const auto p = scratch("round.csv");
  save_dataset(p, d);
  const auto e = load_dataset(p);
  EXPECT_EQ(e.points, d.points);
  EXPECT_EQ(e.z, d.z);
  EXPECT_EQ(e.x, d.x);
}

TEST(Data, SplitSizesForFullStudyGrid) {
  const auto d = grid_dataset(51, 10);
  ASSERT_EQ(d.size(), 26010u);
  const auto [train, valid] = split_train_validation(d, 0.8, 11);
  EXPECT_EQ(train.size(), 20808u);
  EXPECT_EQ(valid.size(), 5202u);
}

TEST(Data, SplitIsDeterministicDisjointAndExhaustive) {
  const auto d = grid_dataset(9, 3);
  const auto [a1, b1] = split_train_validation(d, 0.7, 5);
  const auto [a2, b2] = split_train_validation(d, 0.7, 5);
  EXPECT_EQ(a1.points, a2.points);
  EXPECT_EQ(b1.points, b2.points);
  std::vector<double> all;
  for (auto v : a1.z) all.push_back(v);
  for (auto v : b1.z) all.push_back(v);
  std::sort(all.begin(), all.end());
  std::vector<double> expected(d.z.begin(), d.z.end());
  EXPECT_EQ(all, expected);
  const auto [a3, b3] = split_train_validation(d, 0.7, 6);
  EXPECT_NE(a1.points, a3.points);
}

TEST(Data, SplitRejectsBadFraction) {
  const auto d = grid_dataset(3, 1);
  EXPECT_THROW(split_train_validation(d, 0.0, 1), DataError);
  EXPECT_THROW(split_train_validation(d, 1.0, 1), DataError);
  EXPECT_THROW(split_train_validation(d, -0.2, 1), DataError);
}

TEST(Data, ValidateRejectsShapeMismatch) {
  EXPECT_THROW(make_dataset({{0, 0, 0}, {1, 0, 0}}, Eigen::VectorXd::Zero(3)), DataError);
  EXPECT_THROW(make_dataset({{0, 0, 0}}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(2, 1)),
               DataError);
  EXPECT_THROW(make_dataset({{0, 0, std::nan("")}}, Eigen::VectorXd::Zero(1)), DataError);
}

TEST(Data, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}
