#include "ksl/io.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ksl/error.hpp"

namespace ksl {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  fail(ErrorKind::parse, "csv has no column '" + name + "'");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable read_csv_numeric(const std::string& path) {
  const std::string text = read_file(path);
  CsvTable t;
  std::size_t pos = 0, line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (!have_header) {
      for (auto c : cells) t.header.emplace_back(trim(c));
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorKind::parse, path + ": line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      std::string_view c = trim(cells[k]);
      if (!c.empty() && c.front() == '+') c.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size())
        fail(ErrorKind::parse, path + ": line " + std::to_string(line_no) + ", column " + std::to_string(k + 1) +
                                   ": cannot parse '" + std::string(c) + "' as a number");
      row[k] = v;
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorKind::parse, path + ": empty file");
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) fail(ErrorKind::io, "write failed for " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorKind::io, "cannot rename into " + path + ": " + ec.message());
  }
}

std::string csv_string(const std::vector<std::string>& header, const MatrixXd& rows) {
  std::string s;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) s += ',';
    s += header[k];
  }
  s += '\n';
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) {
      if (j) s += ',';
      s += format_double(rows(i, j));
    }
    s += '\n';
  }
  return s;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const MatrixXd& rows) {
  require(static_cast<Index>(header.size()) == rows.cols(), "write_csv: header width differs from data");
  write_file_atomic(path, csv_string(header, rows));
}

namespace {

void put_u64(std::string& s, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
  return v;
}

void put_rowmajor(std::string& s, const MatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(s, bits);
    }
}

}  // namespace

void write_binary_matrices(const std::string& path, const MatrixXd& A, const MatrixXd& B) {
  require(A.rows() == B.rows(), "write_binary_matrices: row counts differ");
  std::string s = "KSL1";
  put_u64(s, static_cast<std::uint64_t>(A.rows()));
  put_u64(s, static_cast<std::uint64_t>(A.cols()));
  put_u64(s, static_cast<std::uint64_t>(B.cols()));
  put_rowmajor(s, A);
  put_rowmajor(s, B);
  write_file_atomic(path, s);
}

BinaryMatrices read_binary_matrices(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 28 || s.compare(0, 4, "KSL1") != 0) fail(ErrorKind::parse, path + ": missing KSL1 header");
  const std::uint64_t M = get_u64(s, 4), D = get_u64(s, 12), C = get_u64(s, 20);
  const std::uint64_t cells = M * (D + C);
  if (M == 0 || D == 0 || C == 0) fail(ErrorKind::parse, path + ": header declares an empty block");
  if (cells / M != D + C || s.size() != 28 + 8 * cells)
    fail(ErrorKind::parse, path + ": payload size does not match header (M=" + std::to_string(M) +
                               ", D=" + std::to_string(D) + ", C=" + std::to_string(C) + ")");
  BinaryMatrices out{MatrixXd(M, D), MatrixXd(M, C)};
  std::size_t at = 28;
  auto fill = [&](MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) {
        std::uint64_t bits = get_u64(s, at);
        at += 8;
        std::memcpy(&m(i, j), &bits, 8);
      }
  };
  fill(out.first);
  fill(out.second);
  return out;
}

Hasher::Hasher() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Hasher::~Hasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Hasher::update(std::string_view bytes) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

void Hasher::update(const MatrixXd& m) {
  std::string s;
  put_u64(s, static_cast<std::uint64_t>(m.rows()));
  put_u64(s, static_cast<std::uint64_t>(m.cols()));
  put_rowmajor(s, m);
  update(s);
}

void Hasher::update(const VectorXd& v) { update(MatrixXd(v)); }

void Hasher::update(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  std::string s;
  put_u64(s, bits);
  update(s);
}

std::string Hasher::hex() {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md, &len);
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += digits[md[i] >> 4];
    out += digits[md[i] & 15];
  }
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  Hasher h;
  h.update(bytes);
  return h.hex();
}

}  // namespace ksl
