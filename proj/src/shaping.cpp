#include "lope/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace lope {

std::vector<double> CurveSpec::uniform_grid(int points) {
  if (points < 1) throw ConfigError("uniform_grid: points must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        static_cast<double>(i + 1) / static_cast<double>(points + 1);
  return grid;
}

void CurveSpec::validate() const {
  if (gamma <= 0.0) throw ConfigError("curve spec: gamma must be > 0");
  if (epsilon <= 0.0) throw ConfigError("curve spec: epsilon must be > 0");
  if (grid.empty()) throw ConfigError("curve spec: empty grid");
  if (pi_old_set.empty()) throw ConfigError("curve spec: empty pi_old set");
  double prev = 0.0;
  for (double x : grid) {
    if (x <= prev || x >= 1.0)
      throw ConfigError("curve spec: grid must be strictly increasing in (0,1)");
    prev = x;
  }
  for (double p : pi_old_set)
    if (p <= 0.0) throw ConfigError("curve spec: pi_old must be > 0");
}

double vanilla_bound(double pi, double pi_old) {
  return pi * (1.0 - pi) / pi_old;
}

double clipped_bound(double pi, double pi_old, double epsilon) {
  return pi / pi_old <= 1.0 + epsilon ? vanilla_bound(pi, pi_old) : 0.0;
}

double shaped_bound(double pi, double pi_old, double gamma) {
  const double d = pi + gamma * pi_old;
  return gamma * pi_old * pi * (1.0 - pi) / (d * d);
}

double peak_location(double pi_old, double gamma) {
  return gamma * pi_old / (1.0 + 2.0 * gamma * pi_old);
}

double peak_value(double pi_old, double gamma) {
  return 1.0 / (4.0 * (1.0 + gamma * pi_old));
}

AdvantageClosedForm advantage_closed_form(int G, int G_prime, int c) {
  if (G < 2) throw ConfigError("advantage_closed_form: G must be >= 2");
  if (G_prime < 1) throw ConfigError("advantage_closed_form: G' must be >= 1");
  if (c < 1)
    throw ConfigError("advantage_closed_form: undefined for c = 0");
  if (c > G_prime)
    throw ConfigError("advantage_closed_form: c cannot exceed G'");
  const int N_s = std::min(c, G - 1);
  AdvantageClosedForm out;
  out.A_plus = std::sqrt(static_cast<double>(G - N_s) / N_s);
  out.A_hat_plus = std::sqrt(static_cast<double>(G + G_prime - c) / c);
  out.ratio = out.A_hat_plus / out.A_plus;
  return out;
}

int emit_gradient_curves(const CurveSpec& spec, std::ostream& out) {
  spec.validate();
  out << "pi,pi_old,vanilla,clipped,shaped\n";
  out << std::setprecision(12);
  int rows = 0;
  for (double pi_old : spec.pi_old_set) {
    for (double pi : spec.grid) {
      out << pi << ',' << pi_old << ',' << vanilla_bound(pi, pi_old) << ','
          << clipped_bound(pi, pi_old, spec.epsilon) << ','
          << shaped_bound(pi, pi_old, spec.gamma) << '\n';
      ++rows;
    }
  }
  if (!out) throw std::runtime_error("emit_gradient_curves: write failure");
  return rows;
}

int emit_amplification_table(int G, int G_prime, std::ostream& out) {
  out << "c,A_plus,A_hat_plus,ratio\n";
  out << std::setprecision(12);
  int rows = 0;
  for (int c = 1; c <= G_prime; ++c) {
    const auto cf = advantage_closed_form(G, G_prime, c);
    out << c << ',' << cf.A_plus << ',' << cf.A_hat_plus << ',' << cf.ratio
        << '\n';
    ++rows;
  }
  if (!out) throw std::runtime_error("emit_amplification_table: write failure");
  return rows;
}

}  // namespace lope
