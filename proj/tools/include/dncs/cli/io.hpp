#pragma once

#include <string>
#include <vector>

#include "dncs/linalg.hpp"
#include "dncs/sim_eval.hpp"

/// Text artifacts: matrix files, sweep and trace CSV, digests.
namespace dncs::cli {

/// Shortest decimal form that round-trips (at most 17 significant digits).
std::string format_number(double v);

/// "rows cols" then one line per row, values as by format_number.
std::string format_matrix(const Matrix& M);
Matrix parse_matrix(const std::string& text);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

inline constexpr const char* kSweepHeader =
    "delay_s,mode,measure,value,lower_bound,upper_bound,status";

/// Commas and line breaks in the status column become ';' and ' '.
std::string sanitize_field(const std::string& s);

std::string format_sweep_csv(const std::vector<sim::SweepRow>& rows);

/// t, states, u, u_bar and y columns.
std::string format_trace_csv(const sim::Trace& trace, Index machines);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);

}  // namespace dncs::cli
