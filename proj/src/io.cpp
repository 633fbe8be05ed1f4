#include "hjbpod/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hjbpod/errors.hpp"

namespace hjbpod {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order and assume little-endian");

namespace {

constexpr char kMatrixMagic[8] = {'H', 'J', 'B', 'P', 'M', 'A', 'T', '1'};
constexpr char kValueMagic[8] = {'H', 'J', 'B', 'P', 'V', 'A', 'L', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("truncated binary file");
  return value;
}

void expect_magic(std::istream& in, const char (&magic)[8], const char* what) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) {
    throw ConfigError(std::string("not a ") + what + " file (bad magic)");
  }
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad number '" + s + "' in CSV");
  return v;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, ptr);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(kMatrixMagic, 8);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix read_matrix(std::istream& in) {
  expect_magic(in, kMatrixMagic, "matrix");
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw ConfigError("implausible matrix size");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw ConfigError("truncated matrix payload");
  return m;
}

void save_matrix(const std::string& path, const Matrix& m) {
  auto out = open_out(path, true);
  write_matrix(out, m);
}

Matrix load_matrix(const std::string& path) {
  auto in = open_in(path, true);
  return read_matrix(in);
}

void save_snapshots(const std::string& path, const SnapshotSet& snapshots) {
  auto out = open_out(path, true);
  write_matrix(out, snapshots.columns);
  write_matrix(out, snapshots.weights);
}

SnapshotSet load_snapshots(const std::string& path) {
  auto in = open_in(path, true);
  SnapshotSet s;
  s.columns = read_matrix(in);
  s.weights = read_matrix(in);
  if (s.weights.size() != s.columns.cols()) throw ConfigError("snapshot weights do not match");
  return s;
}

void save_basis(const std::string& path, const PodBasis& basis) {
  auto out = open_out(path, true);
  write_matrix(out, basis.psi);
  write_matrix(out, basis.eigenvalues);
  write_matrix(out, basis.mass);
}

PodBasis load_basis(const std::string& path) {
  auto in = open_in(path, true);
  PodBasis b;
  b.psi = read_matrix(in);
  const Matrix ev = read_matrix(in);
  if (ev.cols() != 1) throw ConfigError("eigenvalue block must have one column");
  b.eigenvalues = ev.col(0);
  b.mass = read_matrix(in);
  if (b.mass.rows() != b.psi.rows() || b.mass.cols() != b.psi.rows()) {
    throw ConfigError("basis mass matrix has the wrong size");
  }
  return b;
}

void write_value_grid(std::ostream& out, const ValueGrid& grid) {
  out.write(kValueMagic, 8);
  const int d = grid.dim();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double v : grid.box().lower) put<double>(out, v);
  for (double v : grid.box().upper) put<double>(out, v);
  for (std::uint32_t c : grid.counts()) put<std::uint32_t>(out, c);
  put<double>(out, grid.h());
  put<double>(out, grid.lambda());
  put<double>(out, grid.mesh_size());
  put<std::uint8_t>(out, grid.interpolation() == Interpolation::kSimplex ? 0 : 1);
  put<std::uint8_t>(out, grid.converged ? 1 : 0);
  put<std::uint64_t>(out, grid.iterations);
  put<double>(out, grid.residual);
  out.write(reinterpret_cast<const char*>(grid.values().data()),
            static_cast<std::streamsize>(sizeof(double) * grid.values().size()));
  out.write(reinterpret_cast<const char*>(grid.policy().data()),
            static_cast<std::streamsize>(sizeof(std::uint32_t) * grid.policy().size()));
}

ValueGrid read_value_grid(std::istream& in) {
  expect_magic(in, kValueMagic, "value grid");
  const auto d = get<std::uint32_t>(in);
  if (d == 0 || d > static_cast<std::uint32_t>(kMaxGridDim)) {
    throw ConfigError("value grid dimension out of range");
  }
  Hypercube box;
  for (std::uint32_t j = 0; j < d; ++j) box.lower.push_back(get<double>(in));
  for (std::uint32_t j = 0; j < d; ++j) box.upper.push_back(get<double>(in));
  std::vector<std::uint32_t> counts;
  for (std::uint32_t j = 0; j < d; ++j) counts.push_back(get<std::uint32_t>(in));
  const double h = get<double>(in);
  const double lambda = get<double>(in);
  const double mesh = get<double>(in);
  const auto interp = get<std::uint8_t>(in);
  const auto converged = get<std::uint8_t>(in);
  const auto iterations = get<std::uint64_t>(in);
  const double residual = get<double>(in);

  ValueGrid grid(std::move(box), mesh, h, lambda, std::move(counts),
                 interp == 0 ? Interpolation::kSimplex : Interpolation::kMultilinear);
  in.read(reinterpret_cast<char*>(grid.values().data()),
          static_cast<std::streamsize>(sizeof(double) * grid.size()));
  in.read(reinterpret_cast<char*>(grid.policy().data()),
          static_cast<std::streamsize>(sizeof(std::uint32_t) * grid.size()));
  if (!in) throw ConfigError("truncated value grid payload");
  grid.converged = converged != 0;
  grid.iterations = iterations;
  grid.residual = residual;
  return grid;
}

void save_value_grid(const std::string& path, const ValueGrid& grid) {
  auto out = open_out(path, true);
  write_value_grid(out, grid);
}

ValueGrid load_value_grid(const std::string& path) {
  auto in = open_in(path, true);
  return read_value_grid(in);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, bool reduced) {
  const char prefix = reduced ? 'z' : 'y';
  out << "t,u";
  for (Eigen::Index i = 0; i < trajectory.states.rows(); ++i) out << ',' << prefix << i + 1;
  out << '\n';
  for (std::size_t j = 0; j < trajectory.grid.size(); ++j) {
    out << format_double(trajectory.grid[j]) << ',';
    if (j < trajectory.controls.size()) out << format_double(trajectory.controls[j]);
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < trajectory.states.rows(); ++i) {
      out << ',' << format_double(trajectory.states(i, col));
    }
    out << '\n';
  }
}

void save_trajectory_csv(const std::string& path, const Trajectory& trajectory, bool reduced) {
  auto out = open_out(path, false);
  write_trajectory_csv(out, trajectory, reduced);
}

Trajectory read_trajectory_csv(std::istream& in, bool* reduced) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory CSV");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "t" || header[1] != "u") {
    throw ConfigError("trajectory CSV must start with t,u");
  }
  const auto n = static_cast<Eigen::Index>(header.size() - 2);
  if (reduced) *reduced = n > 0 && header[2].front() == 'z';

  std::vector<double> times;
  std::vector<double> controls;
  std::vector<std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<Eigen::Index>(f.size()) != n + 2) throw ConfigError("ragged trajectory CSV");
    times.push_back(parse_double(f[0]));
    if (!f[1].empty()) controls.push_back(parse_double(f[1]));
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = parse_double(f[i + 2]);
    cols.push_back(std::move(col));
  }
  Trajectory t;
  t.grid = TimeGrid(times);
  t.controls = std::move(controls);
  t.states.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      t.states(i, static_cast<Eigen::Index>(j)) = cols[j][static_cast<std::size_t>(i)];
    }
  }
  return t;
}

void write_error_report_csv(std::ostream& out, const ErrorReport& report) {
  out << "ell,K,h,nodes,iterations,cost,reduced_cost,gap_l2,lqr_gap,proj_sup,apriori,"
         "apriori_in_hypothesis,final_l2,status\n";
  for (const ErrorRow& r : report.rows) {
    out << r.ell << ',' << format_double(r.mesh_size) << ',' << format_double(r.h) << ','
        << r.nodes << ',' << r.iterations << ',' << format_double(r.cost) << ','
        << format_double(r.reduced_cost) << ',' << format_double(r.gap_l2) << ','
        << format_double(r.lqr_gap) << ',' << format_double(r.proj_sup) << ','
        << format_double(r.apriori) << ',' << (r.apriori_in_hypothesis ? 1 : 0) << ','
        << format_double(r.final_l2) << ',' << r.status << '\n';
  }
}

void save_error_report_csv(const std::string& path, const ErrorReport& report) {
  auto out = open_out(path, false);
  write_error_report_csv(out, report);
}

std::string format_error_report(const ErrorReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(4) << "ell" << std::setw(8) << "K" << std::setw(10) << "nodes"
     << std::setw(8) << "iters" << std::setw(13) << "cost" << std::setw(13) << "gap_l2"
     << std::setw(13) << "lqr_gap" << std::setw(13) << "proj_sup" << std::setw(13)
     << "apriori" << std::setw(13) << "final_l2" << "status\n";
  os << std::scientific << std::setprecision(4);
  for (const ErrorRow& r : report.rows) {
    os << std::setw(4) << r.ell << std::setw(8) << std::defaultfloat << r.mesh_size
       << std::setw(10) << r.nodes << std::setw(8) << r.iterations << std::scientific
       << std::setw(13) << r.cost << std::setw(13) << r.gap_l2 << std::setw(13) << r.lqr_gap
       << std::setw(13) << r.proj_sup << std::setw(13) << r.apriori << std::setw(13)
       << r.final_l2 << r.status << (r.apriori_in_hypothesis ? "" : " (bound outside hypothesis)")
       << '\n';
  }
  return os.str();
}

}  // namespace hjbpod
