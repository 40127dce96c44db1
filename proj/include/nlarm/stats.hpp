#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace nlarm::stats {

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;  // sample (n - 1)
};

/// Throws std::invalid_argument for fewer than two values.
Summary summarize(std::span<const double> values);

struct PairedTTest {
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-tailed
  int df = 0;
  double mean_diff = 0.0;
  /// Differences have zero variance, so t is undefined. t is reported as 0
  /// (p = 1) when every difference is zero and ±inf (p = 0) otherwise.
  bool degenerate = false;
};

/// d_i = a_i - b_i, t = mean(d) / (sd(d) / √n), df = n - 1.
/// Throws std::invalid_argument on length mismatch or n < 2.
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// I_x(a, b) by Lentz's continued fraction, relative error about 1e-14.
double regularized_incomplete_beta(double x, double a, double b);

/// Two-tailed P(|T| ≥ |t|) for Student's t with df degrees of freedom,
/// I_{df/(df+t²)}(df/2, 1/2). Throws std::invalid_argument for df < 1.
double student_t_sf(double t, double df);

/// Half-up rounding at presentation time: 0.125 -> 0.13, -0.125 -> -0.13.
double round_half_up(double x, int decimals);
std::string format_fixed(double x, int decimals);

struct PrintedSummary {
  double edge_avg, edge_stdev, cloud_avg, cloud_stdev;
};

struct LatencyRow {
  int id = 0;
  std::array<double, 3> edge{};
  std::array<double, 3> cloud{};
  std::optional<PrintedSummary> printed;
};

struct LatencyTable {
  std::vector<LatencyRow> rows;
};

/// {commands:[{id, edge:[3], cloud:[3], printed?:{edge_avg,...}}]}.
/// Throws std::invalid_argument for wrong trial counts or non-positive times.
LatencyTable latency_table_from_json(const nlohmann::json& doc);
LatencyTable load_latency_table(const std::filesystem::path& path = {});

struct CellCheck {
  int id = 0;
  std::string column;  // edge_avg, edge_stdev, cloud_avg, cloud_stdev
  double computed = 0.0;
  double printed = 0.0;
  bool match = false;  // equal after half-up rounding to 2 decimals
};

struct Table2Report {
  struct Row {
    int id;
    LatencyRow data;
    Summary edge, cloud;
  };
  std::vector<Row> rows;
  PairedTTest test;  // edge means vs cloud means
  std::vector<CellCheck> cells;
  int mismatches() const;
};

Table2Report reproduce_table2(const LatencyTable& table);
std::string format_table2(const Table2Report& report);
nlohmann::json to_json(const Table2Report& report);
nlohmann::json to_json(const PairedTTest& t);

}  // namespace nlarm::stats
