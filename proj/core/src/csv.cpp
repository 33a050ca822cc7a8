#include "cspt/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace cspt {

namespace {

const std::vector<std::string> kBoundaryHeader{"rho", "alpha_c", "at_valid"};
const std::vector<std::string> kTrialsHeader{"N", "rho", "P_c", "seed"};

void expect_header(const CsvTable& table, const std::vector<std::string>& header) {
  if (table.header != header) throw std::invalid_argument("unexpected CSV header");
  for (const auto& row : table.rows)
    if (row.size() != header.size()) throw std::invalid_argument("CSV row has wrong column count");
}

template <typename Int>
Int parse_int(std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(text) + "'");
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  // Shortest round-trip digits; plain decimals for everyday magnitudes.
  const double mag = std::abs(value);
  const auto style = (mag == 0.0 || (mag >= 1e-5 && mag < 1e16)) ? std::chars_format::fixed
                                                                 : std::chars_format::general;
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, style);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return value;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

CsvTable boundary_table(const PhaseBoundary& boundary) {
  CsvTable table{kBoundaryHeader, {}};
  for (const auto& p : boundary.points)
    table.rows.push_back({format_double(p.rho), format_double(p.alpha_c ? *p.alpha_c : std::nan("")),
                          p.at_valid ? "true" : "false"});
  return table;
}

std::vector<BoundaryPoint> boundary_points(const CsvTable& table) {
  expect_header(table, kBoundaryHeader);
  std::vector<BoundaryPoint> points;
  for (const auto& row : table.rows) {
    BoundaryPoint p;
    p.rho = parse_double(row[0]);
    const double a = parse_double(row[1]);
    if (!std::isnan(a)) p.alpha_c = a;
    p.at_valid = parse_bool(row[2]);
    points.push_back(p);
  }
  return points;
}

CsvTable trials_table(const std::vector<TrialOutcome>& outcomes) {
  CsvTable table{kTrialsHeader, {}};
  for (const auto& o : outcomes)
    table.rows.push_back({std::to_string(o.n), format_double(o.rho), std::to_string(o.p_critical),
                          std::to_string(o.seed)});
  return table;
}

std::vector<TrialOutcome> trial_outcomes(const CsvTable& table) {
  expect_header(table, kTrialsHeader);
  std::vector<TrialOutcome> outcomes;
  for (const auto& row : table.rows) {
    TrialOutcome o;
    o.n = parse_int<int>(row[0]);
    o.rho = parse_double(row[1]);
    o.p_critical = parse_int<int>(row[2]);
    o.seed = parse_int<std::uint64_t>(row[3]);
    outcomes.push_back(o);
  }
  return outcomes;
}

}  // namespace cspt
