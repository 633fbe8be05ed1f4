#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hjbpod/analysis.hpp"
#include "hjbpod/hjb.hpp"
#include "hjbpod/rom.hpp"
#include "hjbpod/types.hpp"

namespace hjbpod {

/// Flat binary matrix block, little-endian:
///   char[8] "HJBPMAT1", u64 rows, u64 cols, rows*cols f64 (column-major).
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

/// Snapshot file: columns block followed by a 1-column weights block.
void save_snapshots(const std::string& path, const SnapshotSet& snapshots);
SnapshotSet load_snapshots(const std::string& path);

/// Basis file: psi block, eigenvalue block (1 column), mass block.
void save_basis(const std::string& path, const PodBasis& basis);
PodBasis load_basis(const std::string& path);

/// Value grid file, little-endian:
///   char[8] "HJBPVAL1", u32 dim, f64 lower[dim], f64 upper[dim],
///   u32 counts[dim], f64 h, f64 lambda, f64 K, u8 interpolation,
///   u8 converged, u64 iterations, f64 residual,
///   f64 values[N], u32 policy[N]  (N = prod counts, axis 0 fastest).
void write_value_grid(std::ostream& out, const ValueGrid& grid);
ValueGrid read_value_grid(std::istream& in);

void save_value_grid(const std::string& path, const ValueGrid& grid);
ValueGrid load_value_grid(const std::string& path);

/// CSV with header t,u,y1..yn (or z1..zl for reduced coordinates). The u
/// column is empty on the last row since no control acts after t_e.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, bool reduced = false);
void save_trajectory_csv(const std::string& path, const Trajectory& trajectory,
                         bool reduced = false);
/// Inverse of write_trajectory_csv; `reduced` reports the header flavour.
Trajectory read_trajectory_csv(std::istream& in, bool* reduced = nullptr);

void write_error_report_csv(std::ostream& out, const ErrorReport& report);
void save_error_report_csv(const std::string& path, const ErrorReport& report);

/// Fixed-width table for terminals.
std::string format_error_report(const ErrorReport& report);

/// Shortest round-trip representation of a double.
std::string format_double(double value);

}  // namespace hjbpod
