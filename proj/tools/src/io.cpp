#include "dncs/cli/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "dncs/grid_model.hpp"

namespace dncs::cli {

std::string format_number(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);
}

std::string format_matrix(const Matrix& M) {
  std::string out = fmt::format("{} {}\n", M.rows(), M.cols());
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out += ' ';
      out += format_number(M(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  Index rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw std::runtime_error("matrix file: missing 'rows cols' header");
  }
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!(in >> M(i, j))) throw std::runtime_error("matrix file: too few values");
    }
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("matrix file: trailing data");
  return M;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string sanitize_field(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string format_sweep_csv(const std::vector<sim::SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", format_number(r.delay), r.mode, r.measure,
                       format_number(r.value), format_number(r.lower), format_number(r.upper),
                       sanitize_field(r.status));
  }
  return out;
}

std::string format_trace_csv(const sim::Trace& trace, Index machines) {
  std::string out = "t";
  for (Index i = 0; i < 3 * machines; ++i) out += "," + grid::LinearPlant::state_name(i);
  for (Index i = 0; i < machines; ++i) out += fmt::format(",u_{}", i + 1);
  for (Index i = 0; i < machines; ++i) out += fmt::format(",ubar_{}", i + 1);
  const Index ny = trace.y.empty() ? 0 : trace.y.front().size();
  for (Index i = 0; i < ny; ++i) out += fmt::format(",y_{}", i + 1);
  out += '\n';
  for (size_t k = 0; k < trace.t.size(); ++k) {
    out += format_number(trace.t[k]);
    for (Index i = 0; i < trace.x[k].size(); ++i) out += "," + format_number(trace.x[k](i));
    for (Index i = 0; i < trace.u[k].size(); ++i) out += "," + format_number(trace.u[k](i));
    for (Index i = 0; i < trace.u_bar[k].size(); ++i) out += "," + format_number(trace.u_bar[k](i));
    if (ny) {
      for (Index i = 0; i < ny; ++i) out += "," + format_number(trace.y[k](i));
    }
    out += '\n';
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace dncs::cli
