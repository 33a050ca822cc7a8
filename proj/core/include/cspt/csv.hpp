#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cspt/experiment.hpp"
#include "cspt/replica.hpp"

namespace cspt {

/// Shortest text that parses back to the same double; "nan", "inf", "-inf".
std::string format_double(double value);
/// Inverse of format_double. Throws std::invalid_argument.
double parse_double(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Plain comma-separated text: no quoting, '\n' line endings.
CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

/// Columns rho,alpha_c,at_valid; a missing alpha_c is written as nan.
CsvTable boundary_table(const PhaseBoundary& boundary);
std::vector<BoundaryPoint> boundary_points(const CsvTable& table);

/// Columns N,rho,P_c,seed.
CsvTable trials_table(const std::vector<TrialOutcome>& outcomes);
std::vector<TrialOutcome> trial_outcomes(const CsvTable& table);

}  // namespace cspt
