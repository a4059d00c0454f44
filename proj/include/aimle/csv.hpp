#pragma once

// Long-format CSV output: comma separated, '\n' line endings, no quoting.
// Reals are written in shortest round-trip form.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "aimle/bench.hpp"

namespace aimle {

inline constexpr std::string_view kBenchHeader =
    "estimator,spec,n,S,lambda,tau,seed,cosine,l0_norm,zero_fraction,wall_time_s";
inline constexpr std::string_view kAggregateHeader =
    "estimator,spec,n,S,lambda,tau,count,cosine_mean,cosine_std,l0_mean,zero_fraction_mean";
inline constexpr std::string_view kTrajectoryHeader = "step,loss,lambda,g_bar,alpha";
inline constexpr std::string_view kBiasHeader =
    "lambda,component,exact_grad,expected_unscaled,expected_scaled,bias";

std::string format_real(double x);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

struct BiasRow {
  double lambda = 0.0;
  std::size_t component = 0;
  double exact_grad = 0.0;
  double expected_unscaled = 0.0;
  double expected_scaled = 0.0;
  double bias = 0.0;  // expected_scaled - exact_grad
};
void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
  double real(std::size_t row, std::string_view name) const;
};

// Throws InvalidArgument on ragged rows.
CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

}  // namespace aimle
