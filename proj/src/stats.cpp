#include "nlarm/stats.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nlarm/llm_backend.hpp"

namespace nlarm::stats {

using nlohmann::json;

Summary summarize(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("summarize: need at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1))};
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Summary s = summarize(d);

  PairedTTest out;
  out.df = static_cast<int>(d.size()) - 1;
  out.mean_diff = s.mean;
  // Differences equal to rounding noise count as constant.
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  if (s.stdev <= 1e-14 * std::max(scale, 1.0)) {
    out.degenerate = true;
    if (std::abs(s.mean) <= 1e-14 * std::max(scale, 1.0)) {
      out.t_statistic = 0.0;
      out.p_value = 1.0;
    } else {
      out.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), s.mean);
      out.p_value = 0.0;
    }
    return out;
  }
  out.t_statistic = s.mean / (s.stdev / std::sqrt(static_cast<double>(d.size())));
  out.p_value = student_t_sf(out.t_statistic, out.df);
  return out;
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("incomplete beta: a and b must be positive");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1) / (a + b + 2)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double student_t_sf(double t, double df) {
  if (!(df >= 1)) throw std::invalid_argument("student_t_sf: df must be at least 1");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return regularized_incomplete_beta(df / (df + t * t), df / 2, 0.5);
}

double round_half_up(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a few ulps so decimal ties stored just below the tie round up.
  const double scaled = std::abs(x) * scale;
  const double r = std::floor(scaled + 0.5 + 4 * std::numeric_limits<double>::epsilon() * scaled) / scale;
  return std::copysign(r, x);
}

std::string format_fixed(double x, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << round_half_up(x, decimals);
  std::string s = os.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

namespace {

std::array<double, 3> trials(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 3) throw std::invalid_argument(field + ": expected exactly 3 trials");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw std::invalid_argument(field + ": trial values must be numbers");
    out[i] = v[i].get<double>();
    if (!(out[i] > 0) || !std::isfinite(out[i])) throw std::invalid_argument(field + ": trial values must be positive");
  }
  return out;
}

}  // namespace

LatencyTable latency_table_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("commands") || !doc["commands"].is_array()) {
    throw std::invalid_argument("latency fixture: expected {commands: [...]}");
  }
  LatencyTable table;
  for (const auto& c : doc["commands"]) {
    LatencyRow row;
    if (!c.is_object() || !c.contains("id") || !c["id"].is_number_integer()) {
      throw std::invalid_argument("latency fixture: every command needs an integer id");
    }
    row.id = c["id"].get<int>();
    const std::string where = "command " + std::to_string(row.id);
    if (!c.contains("edge") || !c.contains("cloud")) throw std::invalid_argument(where + ": missing edge or cloud");
    row.edge = trials(c["edge"], where + ".edge");
    row.cloud = trials(c["cloud"], where + ".cloud");
    if (c.contains("printed")) {
      const auto& p = c["printed"];
      try {
        row.printed = PrintedSummary{p.at("edge_avg").get<double>(), p.at("edge_stdev").get<double>(),
                                     p.at("cloud_avg").get<double>(), p.at("cloud_stdev").get<double>()};
      } catch (const json::exception& e) {
        throw std::invalid_argument(where + ".printed: " + e.what());
      }
    }
    for (const auto& r : table.rows) {
      if (r.id == row.id) throw std::invalid_argument(where + ": duplicate id");
    }
    table.rows.push_back(row);
  }
  if (table.rows.size() < 2) throw std::invalid_argument("latency fixture: need at least two commands");
  return table;
}

LatencyTable load_latency_table(const std::filesystem::path& path) {
  const auto p = path.empty() ? intent::data_dir() / "table2.json" : path;
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("cannot open latency fixture " + p.string());
  try {
    return latency_table_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(p.string() + ": " + e.what());
  }
}

int Table2Report::mismatches() const {
  int n = 0;
  for (const auto& c : cells) n += c.match ? 0 : 1;
  return n;
}

Table2Report reproduce_table2(const LatencyTable& table) {
  Table2Report report;
  std::vector<double> edge_means, cloud_means;
  for (const auto& r : table.rows) {
    const Summary e = summarize(r.edge), c = summarize(r.cloud);
    report.rows.push_back({r.id, r, e, c});
    edge_means.push_back(e.mean);
    cloud_means.push_back(c.mean);
    if (r.printed) {
      auto check = [&](const char* column, double computed, double printed) {
        report.cells.push_back({r.id, column, computed, printed,
                                format_fixed(computed, 2) == format_fixed(printed, 2)});
      };
      check("edge_avg", e.mean, r.printed->edge_avg);
      check("edge_stdev", e.stdev, r.printed->edge_stdev);
      check("cloud_avg", c.mean, r.printed->cloud_avg);
      check("cloud_stdev", c.stdev, r.printed->cloud_stdev);
    }
  }
  report.test = paired_t_test(edge_means, cloud_means);
  return report;
}

std::string format_table2(const Table2Report& report) {
  std::ostringstream os;
  auto cell = [&](double v, int w = 7) { os << std::setw(w) << format_fixed(v, 2); };
  os << std::left << std::setw(8) << "" << std::setw(35) << "  Edge" << "  Cloud\n";
  os << std::setw(8) << "Command" << std::right;
  for (int side = 0; side < 2; ++side) {
    for (const char* h : {"T1", "T2", "T3", "AVG", "STDEV"}) os << std::setw(7) << h;
  }
  os << "\n";
  for (const auto& r : report.rows) {
    os << std::left << std::setw(8) << r.id << std::right;
    for (double v : r.data.edge) cell(v);
    cell(r.edge.mean);
    cell(r.edge.stdev);
    for (double v : r.data.cloud) cell(v);
    cell(r.cloud.mean);
    cell(r.cloud.stdev);
    os << "\n";
  }
  if (!report.cells.empty()) {
    os << "printed cells matched: " << report.cells.size() - report.mismatches() << "/" << report.cells.size() << "\n";
  }
  const auto& t = report.test;
  os << "paired t-test (edge vs cloud means, n=" << t.df + 1 << "): t = " << std::fixed << std::setprecision(3)
     << t.t_statistic << ", p = " << t.p_value << ", df = " << t.df << "\n";
  return os.str();
}

json to_json(const PairedTTest& t) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"t_statistic", num(t.t_statistic)},
          {"p_value", t.p_value},
          {"df", t.df},
          {"mean_diff", t.mean_diff},
          {"degenerate", t.degenerate}};
}

json to_json(const Table2Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"id", r.id},
                    {"edge", r.data.edge},
                    {"cloud", r.data.cloud},
                    {"edge_avg", r.edge.mean},
                    {"edge_stdev", r.edge.stdev},
                    {"cloud_avg", r.cloud.mean},
                    {"cloud_stdev", r.cloud.stdev}});
  }
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"id", c.id}, {"column", c.column}, {"computed", c.computed}, {"printed", c.printed}, {"match", c.match}});
  }
  return {{"rows", rows}, {"paired_t_test", to_json(report.test)}, {"cells", cells}, {"mismatches", report.mismatches()}};
}

}  // namespace nlarm::stats
