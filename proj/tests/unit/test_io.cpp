#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "hjbpod/errors.hpp"
#include "hjbpod/io.hpp"

namespace hjbpod {
namespace {

template <typename T>
T read_raw(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

TEST(MatrixFile, RoundTripAndLayout) {
  Matrix m(2, 3);
  m << 1.0, -0.1, 1e-300, std::numeric_limits<double>::infinity(), 3.25, -0.0;
  std::stringstream s;
  write_matrix(s, m);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 8u + 16u + 6u * 8u);
  EXPECT_EQ(bytes.substr(0, 8), "HJBPMAT1");
  EXPECT_EQ(read_raw<std::uint64_t>(bytes, 8), 2u);
  EXPECT_EQ(read_raw<std::uint64_t>(bytes, 16), 3u);
  EXPECT_EQ(read_raw<double>(bytes, 24 + 8), std::numeric_limits<double>::infinity());
  const Matrix back = read_matrix(s);
  EXPECT_EQ(back, m);
  EXPECT_TRUE(std::signbit(back(1, 2)));
}

TEST(MatrixFile, RejectsCorruptInput) {
  std::stringstream bad("HJBPXXXX0000000000000000");
  EXPECT_THROW(read_matrix(bad), ConfigError);
  std::stringstream s;
  write_matrix(s, Matrix::Ones(4, 4));
  std::stringstream truncated(s.str().substr(0, 40));
  EXPECT_THROW(read_matrix(truncated), ConfigError);
  EXPECT_THROW(load_matrix("/nonexistent/m.bin"), ConfigError);
}

TEST(SnapshotAndBasisFiles, RoundTrip) {
  const std::string dir = ::testing::TempDir();
  SnapshotSet set;
  set.columns = Matrix::Random(5, 4);
  set.weights = Vector::LinSpaced(4, 0.5, 2.0);
  save_snapshots(dir + "snap.bin", set);
  const SnapshotSet s = load_snapshots(dir + "snap.bin");
  EXPECT_EQ(s.columns, set.columns);
  EXPECT_EQ(s.weights, set.weights);

  PodBasis b;
  b.psi = Matrix::Random(5, 2);
  b.eigenvalues = Vector::LinSpaced(4, 4.0, 1.0);
  b.mass = 0.2 * Matrix::Identity(5, 5);
  save_basis(dir + "basis.bin", b);
  const PodBasis r = load_basis(dir + "basis.bin");
  EXPECT_EQ(r.psi, b.psi);
  EXPECT_EQ(r.eigenvalues, b.eigenvalues);
  EXPECT_EQ(r.mass, b.mass);
}

TEST(ValueGridFile, RoundTripPreservesEverything) {
  ValueGrid g(Hypercube{{-1.0, 0.0}, {1.0, 0.5}}, 0.3, 0.03, 1.0, {4, 3},
              Interpolation::kMultilinear);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.values()[i] = 0.1 * static_cast<double>(i) - 0.3;
    g.policy()[i] = static_cast<std::uint32_t>(i % 5);
  }
  g.converged = true;
  g.iterations = 123;
  g.residual = 4.5e-9;
  std::stringstream s;
  write_value_grid(s, g);
  const std::string bytes = s.str();
  EXPECT_EQ(bytes.substr(0, 8), "HJBPVAL1");
  EXPECT_EQ(read_raw<std::uint32_t>(bytes, 8), 2u);
  EXPECT_EQ(read_raw<double>(bytes, 12), -1.0);
  EXPECT_EQ(read_raw<double>(bytes, 36), 0.5);
  EXPECT_EQ(read_raw<std::uint32_t>(bytes, 44), 4u);
  EXPECT_EQ(read_raw<std::uint32_t>(bytes, 48), 3u);
  // header 52 + h, lambda, K + 2 flags + iterations + residual
  const std::size_t payload = 52 + 24 + 2 + 8 + 8;
  EXPECT_EQ(bytes.size(), payload + 12 * 8 + 12 * 4);

  const ValueGrid r = read_value_grid(s);
  EXPECT_EQ(r.counts(), g.counts());
  EXPECT_EQ(r.box().lower, g.box().lower);
  EXPECT_EQ(r.box().upper, g.box().upper);
  EXPECT_EQ(r.h(), 0.03);
  EXPECT_EQ(r.mesh_size(), 0.3);
  EXPECT_EQ(r.lambda(), 1.0);
  EXPECT_EQ(r.interpolation(), Interpolation::kMultilinear);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 123u);
  EXPECT_EQ(r.residual, 4.5e-9);
  EXPECT_EQ(r.values(), g.values());
  EXPECT_EQ(r.policy(), g.policy());
  const Vector p = Vector::Constant(2, 0.2);
  EXPECT_EQ(r.interpolate(p), g.interpolate(p));

  std::stringstream wrong;
  write_matrix(wrong, Matrix::Ones(1, 1));
  EXPECT_THROW(read_value_grid(wrong), ConfigError);
}

TEST(TrajectoryCsv, RoundTripIsExact) {
  Trajectory t;
  t.grid = TimeGrid::uniform(0.3, 0.1);
  t.states = Matrix::Random(3, 4);
  t.controls = {0.1, -2.2, 1.0 / 3.0};
  std::stringstream s;
  write_trajectory_csv(s, t);
  std::string header;
  std::getline(std::istringstream(s.str()), header);
  EXPECT_EQ(header, "t,u,y1,y2,y3");
  const std::string text = s.str();
  const std::size_t last = text.rfind('\n', text.size() - 2);
  EXPECT_EQ(text.substr(last + 1, 5), "0.3,,");
  bool reduced = true;
  const Trajectory r = read_trajectory_csv(s, &reduced);
  EXPECT_FALSE(reduced);
  EXPECT_EQ(r.grid.nodes(), t.grid.nodes());
  EXPECT_EQ(r.controls, t.controls);
  EXPECT_EQ(r.states, t.states);

  std::stringstream z;
  write_trajectory_csv(z, t, true);
  read_trajectory_csv(z, &reduced);
  EXPECT_TRUE(reduced);
  std::stringstream bad("x,y\n1,2\n");
  EXPECT_THROW(read_trajectory_csv(bad), ConfigError);
}

TEST(ErrorReport, CsvAndTable) {
  ErrorReport rep;
  ErrorRow row;
  row.ell = 3;
  row.mesh_size = 0.05;
  row.h = 0.005;
  row.cost = 0.0401;
  row.status = "failed: grid too large";
  rep.rows.push_back(row);
  std::ostringstream csv;
  write_error_report_csv(csv, rep);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, 15), "ell,K,h,nodes,i");
  EXPECT_NE(text.find("\n3,0.05,0.005,0,0,0.0401,"), std::string::npos);
  EXPECT_NE(text.find(",nan,"), std::string::npos);
  EXPECT_NE(text.find("failed: grid too large\n"), std::string::npos);
  EXPECT_NE(format_error_report(rep).find("failed: grid too large"), std::string::npos);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(1.0 / 7.0)), 1.0 / 7.0);
}

}  // namespace
}  // namespace hjbpod
