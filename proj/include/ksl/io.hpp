#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ksl/linalg.hpp"

namespace ksl {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Column index by name; throws a parse error when missing.
  std::size_t column(const std::string& name) const;
};

// Reads a comma-separated file whose first line is a header and all other
// cells are numbers ("nan"/"inf" parse; callers validate finiteness).
CsvTable read_csv_numeric(const std::string& path);

// Round-trip formatting: 17 significant digits, '.' decimal.
std::string format_double(double v);

// Writes via a temporary file then renames it into place.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

std::string csv_string(const std::vector<std::string>& header, const MatrixXd& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header, const MatrixXd& rows);

// "KSL1" container: magic, then M, D, C as little-endian u64, then two
// row-major f64 blocks (M x D, then M x C).
using BinaryMatrices = std::pair<MatrixXd, MatrixXd>;
void write_binary_matrices(const std::string& path, const MatrixXd& A, const MatrixXd& B);
BinaryMatrices read_binary_matrices(const std::string& path);

std::string sha256_hex(std::string_view bytes);

// Incremental hashing of heterogeneous inputs.
class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;
  void update(std::string_view bytes);
  void update(const MatrixXd& m);
  void update(const VectorXd& v);
  void update(double x);
  std::string hex();

 private:
  void* ctx_;
};

}  // namespace ksl
