#include "aimle/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "aimle/errors.hpp"

namespace aimle {

std::string format_real(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kBenchHeader << '\n';
  for (const auto& r : records) {
    out << r.estimator << ',' << r.spec << ',' << r.n << ',' << r.samples << ',' << r.lambda << ','
        << format_real(r.tau) << ',' << r.seed << ',' << format_real(r.cosine) << ','
        << format_real(r.l0_norm) << ',' << format_real(r.zero_fraction) << ','
        << format_real(r.wall_time_s) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    out << r.estimator << ',' << r.spec << ',' << r.n << ',' << r.samples << ',' << r.lambda << ','
        << format_real(r.tau) << ',' << r.count << ',' << format_real(r.cosine_mean) << ','
        << format_real(r.cosine_std) << ',' << format_real(r.l0_mean) << ','
        << format_real(r.zero_fraction_mean) << '\n';
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << format_real(r.loss) << ',' << format_real(r.lambda) << ','
        << format_real(r.g_bar) << ',' << format_real(r.alpha) << '\n';
  }
}

void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows) {
  out << kBiasHeader << '\n';
  for (const auto& r : rows) {
    out << format_real(r.lambda) << ',' << r.component << ',' << format_real(r.exact_grad) << ','
        << format_real(r.expected_unscaled) << ',' << format_real(r.expected_scaled) << ','
        << format_real(r.bias) << '\n';
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidArgument("no column '" + std::string(name) + "'");
}

double CsvTable::real(std::size_t row, std::string_view name) const {
  const auto& field = rows.at(row).at(column(name));
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw InvalidArgument("column '" + std::string(name) + "' is not numeric: " + field);
  }
  return value;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty CSV");
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw InvalidArgument("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto write_row = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

}  // namespace aimle
