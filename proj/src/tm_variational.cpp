#include "tmcf/tm_variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "tmcf/ineq_verify.hpp"
#include "tmcf/linear_solvers.hpp"
#include "tmcf/parallel.hpp"

namespace tmcf {

namespace {

void require_positive_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive and finite");
}

double gradient_energy(const ScalarField& phi) {
  const Grid& g = phi.grid();
  double s = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) {
      const double d = (phi(i, j) - phi(i - 1, j)) / g.hx();
      s += d * d;
    }
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double d = (phi(i, j) - phi(i, j - 1)) / g.hy();
      s += d * d;
    }
  return g.area() * (s / static_cast<double>(g.cell_count()));
}

struct ExpStats {
  double shift;  // mean phi, or max phi when centering would overflow
  double m1;     // mean of expm1(phi - shift)
};

// Centering on the mean keeps ln(mean e^phi) - mean phi = log1p(m1) accurate
// to relative round-off as phi -> const, which the line search relies on.
ExpStats exp_stats(const ScalarField& phi) {
  const double n = static_cast<double>(phi.size());
  double shift = mean(phi);
  if (max_value(phi) - shift > 700.0) shift = max_value(phi);
  double s = 0.0;
  for (double v : phi.values()) s += std::expm1(v - shift);
  return {shift, s / n};
}

// J and, when requested, its L2 gradient.
JTerms evaluate(double beta, const ScalarField& phi, ScalarField* grad) {
  const Grid& g = phi.grid();
  JTerms t;
  t.gradient_energy = gradient_energy(phi);
  t.gradient_term = t.gradient_energy / (4.0 * beta);
  t.mean_term = mean(phi);
  const ExpStats es = exp_stats(phi);
  const double lp = std::log1p(es.m1);
  t.log_term = es.shift + lp;
  t.value = t.gradient_term + (t.mean_term - es.shift) - lp;
  if (grad) {
    *grad = ScalarField(g, 0.0, ScalarBc::neumann);
    auto gv = grad->values();
    apply_neumann_operator(g, phi.values(), gv, 0.0, 1.0);  // -Lap phi
    // 1/area - e^phi / int e^phi, written around the shift
    const double inv_area = 1.0 / g.area();
    for (std::size_t k = 0; k < gv.size(); ++k)
      gv[k] = gv[k] / (2.0 * beta) - inv_area * (std::expm1(phi[k] - es.shift) - es.m1) / (1.0 + es.m1);
  }
  return t;
}

void remove_mean(ScalarField& f) {
  const double m = mean(f);
  if (m != 0.0) f += -m;
}

}  // namespace

JTerms eval_J_terms(double beta, const ScalarField& phi) {
  require_positive_beta(beta);
  return evaluate(beta, phi, nullptr);
}

double eval_J(double beta, const ScalarField& phi) { return eval_J_terms(beta, phi).value; }

double log_exp_integral(const ScalarField& phi) {
  const ExpStats es = exp_stats(phi);
  return es.shift + std::log1p(es.m1) + std::log(phi.grid().area());
}

double exp_integral(const ScalarField& phi) { return std::exp(log_exp_integral(phi)); }

ScalarField grad_J(double beta, const ScalarField& phi) {
  require_positive_beta(beta);
  ScalarField g(phi.grid());
  evaluate(beta, phi, &g);
  return g;
}

double el_residual(double beta, const ScalarField& phi) { return norm_l2(grad_J(beta, phi)); }

MinimizeResult minimize_J(double beta, const ScalarField& init, const MinimizeOptions& opts) {
  require_positive_beta(beta);
  const Grid& grid = init.grid();
  MinimizeResult res{init, 0.0, 0.0, 0.0, 0, false, {}};
  ScalarField& x = res.phi_min;
  x.set_bc(ScalarBc::neumann);
  remove_mean(x);

  const double shift = 1.0 / grid.area();
  const double weight = 1.0 / (2.0 * beta);
  std::unique_ptr<NeumannSpectralInverse> pinv;
  if (opts.precondition) pinv = std::make_unique<NeumannSpectralInverse>(grid);
  ScalarField g(grid), d(grid), x_new(grid), g_new(grid), d_new(grid), ps(grid);
  auto direction = [&](const ScalarField& grad, ScalarField& dir) {
    if (pinv) {
      pinv->apply(grad.values(), dir.values(), shift, weight);
      remove_mean(dir);
    } else {
      dir = grad;
    }
  };

  JTerms t = evaluate(beta, x, &g);
  remove_mean(g);
  direction(g, d);
  double j = t.value;
  res.j_initial = eval_J(beta, init);
  if (opts.record_trace) res.trace.push_back({j, t.gradient_energy});

  // Unpreconditioned: the largest eigenvalue of the quadratic part bounds the
  // stable step. Preconditioned: the metric already matches it.
  const double h = grid.min_spacing();
  double step = pinv ? 1.0 : beta * h * h / 2.0;
  double gd = inner(g, d);
  double gnorm = norm_l2(g);

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (gnorm <= opts.tol) break;
    double alpha = step;
    bool accepted = false;
    JTerms t_new;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t k = 0; k < x.size(); ++k) x_new[k] = x[k] - alpha * d[k];
      remove_mean(x_new);
      t_new = evaluate(beta, x_new, &g_new);
      if (std::isfinite(t_new.value) && t_new.value <= j - opts.armijo_c * alpha * gd) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left

    remove_mean(g_new);
    direction(g_new, d_new);
    // BB1 in the descent metric: <s, M s> / <s, y>.
    double sms = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) ps[k] = x_new[k] - x[k];
    if (pinv) {
      ScalarField ms(grid);
      apply_neumann_operator(grid, ps.values(), ms.values(), shift, weight);
      sms = inner(ps, ms);
    } else {
      sms = inner(ps, ps);
    }
    for (std::size_t k = 0; k < x.size(); ++k) sy += ps[k] * (g_new[k] - g[k]);
    sy *= grid.cell_volume();
    if (opts.step_rule == StepRule::barzilai_borwein && sy > 0.0)
      step = sms / sy;
    else
      step = 2.0 * alpha;

    std::swap(x, x_new);
    std::swap(g, g_new);
    std::swap(d, d_new);
    j = t_new.value;
    gd = inner(g, d);
    gnorm = norm_l2(g);
    if (opts.record_trace) res.trace.push_back({j, t_new.gradient_energy});
  }

  res.j_value = j;
  res.iterations = it;
  res.el_residual_norm = gnorm;
  res.converged = gnorm <= opts.tol;
  return res;
}

// ---------------------------------------------------------------------------

std::vector<ScalarField> multistart_inits(const Grid& g, const Beta0Options& opts) {
  std::vector<ScalarField> inits;
  inits.emplace_back(g, 0.0);
  // Four lowest Neumann modes on the rectangle, ordered by eigenvalue.
  struct Mode {
    int kx, ky;
    double lam;
  };
  std::vector<Mode> modes;
  for (int kx = 0; kx <= 3; ++kx)
    for (int ky = 0; ky <= 3; ++ky) {
      if (kx == 0 && ky == 0) continue;
      const double a = kx / g.lx(), b = ky / g.ly();
      modes.push_back({kx, ky, a * a + b * b});
    }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.lam < b.lam; });
  constexpr double bump_amplitude = 2.0;
  for (int m = 0; m < 4; ++m)
    for (double sign : {1.0, -1.0}) {
      const Mode md = modes[m];
      inits.push_back(sample(g, [&](double x, double y) {
        return sign * bump_amplitude * std::cos(md.kx * std::numbers::pi * x / g.lx()) *
               std::cos(md.ky * std::numbers::pi * y / g.ly());
      }));
    }
  // Concentrated bump in a corner, where the rectangle is least favourable.
  const double w = 0.1 * std::min(g.lx(), g.ly());
  inits.push_back(sample(g, [&](double x, double y) { return 6.0 * std::exp(-(x * x + y * y) / (w * w)); }));
  for (int r = 0; r < opts.multistarts; ++r) {
    RandomFieldSpec spec;
    spec.max_frequency = 8;
    spec.amplitude = 3.0;
    spec.seed = sample_seed(opts.seed, static_cast<std::size_t>(r));
    inits.push_back(random_smooth_field(g, spec));
  }
  return inits;
}

BetaClassification classify_beta(const Grid& g, double beta, const Beta0Options& opts,
                                 const std::vector<ScalarField>& extra) {
  auto inits = multistart_inits(g, opts);
  inits.insert(inits.end(), extra.begin(), extra.end());
  BetaClassification out;
  out.beta = beta;
  out.starts.resize(inits.size());
  std::vector<std::optional<ScalarField>> minimizers(inits.size());
  parallel_for(inits.size(), [&](std::size_t k) {
    MinimizeResult r = minimize_J(beta, inits[k], opts.minimize);
    out.starts[k] = StartOutcome{static_cast<int>(k), r.j_value, r.el_residual_norm, max_abs(r.phi_min),
                                 r.iterations, r.converged};
    if (r.j_value < -opts.tol_zero) minimizers[k] = std::move(r.phi_min);
  });
  bool any_negative = false, all_zero = true;
  const double sup_tol = std::sqrt(opts.tol_zero);
  out.j_min = std::numeric_limits<double>::infinity();
  for (const auto& s : out.starts) {
    if (s.j_min < out.j_min) {
      out.j_min = s.j_min;
      out.argmin_start = s.start_id;
    }
    if (s.j_min < -opts.tol_zero) any_negative = true;
    if (!(s.j_min >= -opts.tol_zero && s.sup_norm <= sup_tol)) all_zero = false;
  }
  out.cls = any_negative ? BetaClass::negative : (all_zero ? BetaClass::zero : BetaClass::unresolved);
  if (any_negative) out.witness = std::move(minimizers[static_cast<std::size_t>(out.argmin_start)]);
  return out;
}

Beta0Estimate estimate_beta0(const Grid& g, const Beta0Options& opts) {
  if (!(opts.beta_hi_start > 0.0) || opts.beta_hi_start > 2.0 * std::numbers::pi * (1.0 + 1e-15))
    throw std::invalid_argument("beta_hi_start must lie in (0, 2 pi]");
  Beta0Estimate est{0.0, 0.0, 0.0, false, 0, {}, g};
  const int base_count = static_cast<int>(multistart_inits(g, opts).size());
  est.multistart_count = base_count;

  std::vector<ScalarField> witness;
  auto record = [&](double beta) {
    est.samples.push_back(classify_beta(g, beta, opts, witness));
    auto& c = est.samples.back();
    est.multistart_count = std::max(est.multistart_count, static_cast<int>(c.starts.size()));
    if (c.witness) witness.assign(1, *c.witness);
    return c.cls;
  };

  double hi = opts.beta_hi_start;
  if (record(hi) == BetaClass::zero) {
    est.beta_lo = est.beta_hi = est.beta0_hat = hi;
    est.no_negative_bracket = true;
  } else {
    double lo = hi;
    bool found = false;
    for (int k = 0; k < 30; ++k) {
      lo *= 0.5;
      if (record(lo) == BetaClass::zero) {
        found = true;
        break;
      }
      hi = lo;
    }
    if (!found) lo = 0.0;
    for (int s = 0; s < opts.bisect_steps; ++s) {
      const double mid = 0.5 * (lo + hi);
      if (record(mid) == BetaClass::zero)
        lo = mid;
      else
        hi = mid;
    }
    est.beta_lo = lo;
    est.beta_hi = hi;
    est.beta0_hat = 0.5 * (lo + hi);
  }
  std::stable_sort(est.samples.begin(), est.samples.end(),
                   [](const BetaClassification& a, const BetaClassification& b) { return a.beta < b.beta; });
  return est;
}

const char* to_string(BetaClass c) {
  switch (c) {
    case BetaClass::zero: return "zero";
    case BetaClass::negative: return "negative";
    case BetaClass::unresolved: return "unresolved";
  }
  return "unknown";
}

void write_beta0_report(std::ostream& os, const Beta0Estimate& est) {
  nlohmann::ordered_json j;
  j["beta0_hat"] = est.beta0_hat;
  j["bracket"] = {est.beta_lo, est.beta_hi};
  j["estimate_kind"] = "empirical lower-confidence estimate of the discrete threshold";
  j["no_negative_bracket"] = est.no_negative_bracket;
  j["multistart_count"] = est.multistart_count;
  auto per = nlohmann::ordered_json::array();
  for (const auto& s : est.samples) {
    const auto& best = s.starts.at(static_cast<std::size_t>(s.argmin_start));
    per.push_back({{"beta", s.beta},
                   {"j_min", s.j_min},
                   {"start_id", s.argmin_start},
                   {"residual", best.residual},
                   {"class", to_string(s.cls)}});
  }
  j["per_beta"] = per;
  j["grid"] = {{"nx", est.grid.nx()}, {"ny", est.grid.ny()}, {"lx", est.grid.lx()}, {"ly", est.grid.ly()}};
  os << j.dump(2) << '\n';
}

}  // namespace tmcf
