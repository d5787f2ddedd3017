#pragma once

#include <ostream>
#include <vector>

#include "lope/common.hpp"

namespace lope {

struct CurveSpec {
  std::vector<double> pi_old_set = {0.1, 0.3, 0.5, 1.0};
  double gamma = 0.1;
  double epsilon = 0.2;
  std::vector<double> grid;  // strictly increasing, within (0,1)

  static std::vector<double> uniform_grid(int points);  // open interval
  void validate() const;
};

// Vanilla per-token gradient bound pi(1-pi)/pi_old.
double vanilla_bound(double pi, double pi_old);

// Positive-advantage clipped bound: vanilla if pi/pi_old <= 1+eps, else 0.
double clipped_bound(double pi, double pi_old, double epsilon);

// gamma * pi_old * pi * (1-pi) / (pi + gamma*pi_old)^2
double shaped_bound(double pi, double pi_old, double gamma);

// argmax of shaped_bound in pi: gamma*pi_old / (1 + 2*gamma*pi_old)
double peak_location(double pi_old, double gamma);

// max of shaped_bound: 1 / (4 * (1 + gamma*pi_old)), strictly below 1/4.
double peak_value(double pi_old, double gamma);

struct AdvantageClosedForm {
  double A_plus = 0.0;      // sqrt((G - N_s) / N_s), N_s = min(c, G-1)
  double A_hat_plus = 0.0;  // sqrt((G + G' - c) / c)
  double ratio = 0.0;
};

// Closed forms for positive-sample advantages before/after shaping.
// c = 0 is undefined and raises ConfigError.
AdvantageClosedForm advantage_closed_form(int G, int G_prime, int c);

// CSV rows "pi,pi_old,vanilla,clipped,shaped", one per grid point per
// pi_old. Returns the data row count.
int emit_gradient_curves(const CurveSpec& spec, std::ostream& out);

// CSV rows "c,A_plus,A_hat_plus,ratio" for c = 1..G'.
int emit_amplification_table(int G, int G_prime, std::ostream& out);

}  // namespace lope
