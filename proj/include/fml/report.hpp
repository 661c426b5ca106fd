#ifndef FML_REPORT_HPP
#define FML_REPORT_HPP

#include <charconv>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fml {

/// Shortest decimal that reads back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

enum class BoundStatus { Pass, Fail, NotApplicable };

inline std::string to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Pass: return "pass";
    case BoundStatus::Fail: return "fail";
    default: return "not-applicable";
  }
}

/// Both sides of one inequality.
struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double budget = 0.0;  // numerical tolerance granted to the lhs
  std::vector<std::pair<std::string, double>> params;
  BoundStatus status = BoundStatus::NotApplicable;
  std::string label;  // extra qualifier, e.g. "empirical-G"

  double margin() const { return rhs - lhs; }
  bool pass() const { return status == BoundStatus::Pass; }
  bool violated() const { return status == BoundStatus::Fail; }

  void set(const std::string& key, double v) {
    for (auto& [k, x] : params)
      if (k == key) {
        x = v;
        return;
      }
    params.emplace_back(key, v);
  }
  double param(const std::string& key) const {
    for (const auto& [k, x] : params)
      if (k == key) return x;
    return std::nan("");
  }

  /// Decide pass/fail; lhs <= rhs (1 + 1e-9) + budget.
  BoundReport& judge() {
    status = (lhs <= rhs * (1.0 + 1e-9) + budget) ? BoundStatus::Pass : BoundStatus::Fail;
    return *this;
  }
  BoundReport& not_applicable() {
    status = BoundStatus::NotApplicable;
    return *this;
  }

  static std::string csv_header() { return "name,pass,lhs,rhs,margin,params"; }
  std::string csv_row() const {
    std::string s = name + "," + to_string(status) + "," + format_number(lhs) + "," + format_number(rhs) + "," +
                    format_number(margin()) + ",";
    std::string p;
    for (const auto& [k, v] : params) p += (p.empty() ? "" : ";") + k + "=" + format_number(v);
    if (!label.empty()) p += (p.empty() ? "" : ";") + std::string("label=") + label;
    return s + p;
  }
  std::string log_line() const {
    std::string s = "bound=" + name + " status=" + to_string(status) + " lhs=" + format_number(lhs) +
                    " rhs=" + format_number(rhs) + " margin=" + format_number(margin()) + " budget=" + format_number(budget);
    for (const auto& [k, v] : params) s += " " + k + "=" + format_number(v);
    if (!label.empty()) s += " label=" + label;
    return s;
  }
};

}  // namespace fml

#endif  // FML_REPORT_HPP
