#pragma once

// The nonlinearity f of  Δu + f(u) = 0  together with its antiderivative
// F(s) = ∫₀ˢ f and the landmarks B (f ≤ 0 on [0,B], f > 0 above) and
// β (the zero of F above B).

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "annulus/error.hpp"
#include "annulus/roots.hpp"

namespace annulus {

enum class Family { PowerSum, PowerDiff, Custom };

struct Values {
  double f;
  double fprime;
  double F;
  bool fprime_unbounded = false;  // f' blows up at s = 0 (exponent below one)
};

struct Landmarks {
  double B = 0.0;
  double beta = 0.0;
  bool has_negative_part = false;
};

struct CustomOptions {
  double domain_max = std::numeric_limits<double>::infinity();
  // |F(s) - ∫₀ˢ f| allowed, relative to max(1, |F(s)|), on the validation grid.
  double antiderivative_tol = 1e-8;
};

inline constexpr double kLandmarkTol = 1e-12;

namespace detail {

inline std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::vector<double> geometric_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  const double decades = std::log10(hi / lo);
  const int count = std::max(2, static_cast<int>(std::ceil(decades * per_decade)) + 1);
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    out.push_back(lo * std::pow(10.0, decades * k / (count - 1)));
  }
  out.back() = hi;
  return out;
}

}  // namespace detail

class Nonlinearity {
 public:
  using Fn = std::function<double(double)>;

  static Nonlinearity power_sum(double p, double q) { return powers(Family::PowerSum, p, q); }
  static Nonlinearity power_diff(double p, double q) { return powers(Family::PowerDiff, p, q); }

  // User-supplied f, f', F. F is checked against a quadrature of f.
  static Nonlinearity custom(std::string label, Fn f, Fn fprime, Fn F, CustomOptions opts = {}) {
    if (!f || !fprime || !F) throw DomainError("custom nonlinearity needs f, f' and F");
    Nonlinearity nl;
    nl.family_ = Family::Custom;
    nl.label_ = std::move(label);
    nl.custom_ = std::make_shared<CustomFns>(CustomFns{std::move(f), std::move(fprime), std::move(F)});
    nl.opts_ = opts;
    nl.validate_antiderivative();
    nl.compute_landmarks();
    return nl;
  }

  // f(s) = λ s. With λ = π² and n = 3 the radial problem has a closed-form
  // solution, which makes it the reference hook for the integrator.
  static Nonlinearity linear(double lambda = std::numbers::pi * std::numbers::pi) {
    if (!(lambda > 0.0)) throw DomainError("linear nonlinearity needs lambda > 0");
    return custom(
        "linear:lambda=" + detail::shortest(lambda), [lambda](double s) { return lambda * s; },
        [lambda](double) { return lambda; }, [lambda](double s) { return 0.5 * lambda * s * s; });
  }

  static Nonlinearity pure_power(double p) {
    if (!(p > 0.0)) throw DomainError("pure power needs p > 0");
    return custom(
        "power:p=" + detail::shortest(p), [p](double s) { return std::pow(s, p); },
        [p](double s) { return p * std::pow(s, p - 1.0); },
        [p](double s) { return std::pow(s, p + 1.0) / (p + 1.0); });
  }

  // "plus:p=3,q=1", "minus:p=3,q=1", "linear", "linear:lambda=2", "power:p=5".
  static Nonlinearity parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string kind(text.substr(0, colon));
    std::map<std::string, double> params;
    if (colon != std::string_view::npos) {
      std::string_view rest = text.substr(colon + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
          throw DomainError("malformed nonlinearity parameter '" + std::string(item) + "'");
        }
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        try {
          std::size_t used = 0;
          params[key] = std::stod(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
          throw DomainError("bad number '" + value + "' for '" + key + "'");
        }
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
    }
    auto need = [&](const char* key) {
      auto it = params.find(key);
      if (it == params.end()) throw DomainError("nonlinearity '" + kind + "' needs " + key);
      return it->second;
    };
    if (kind == "plus") return power_sum(need("p"), need("q"));
    if (kind == "minus") return power_diff(need("p"), need("q"));
    if (kind == "linear") {
      auto it = params.find("lambda");
      return it == params.end() ? linear() : linear(it->second);
    }
    if (kind == "power") return pure_power(need("p"));
    throw DomainError("unknown nonlinearity kind '" + kind + "' (expected plus, minus, linear, power)");
  }

  Family family() const { return family_; }
  bool is_power_family() const { return family_ != Family::Custom; }
  double p() const { return p_; }
  double q() const { return q_; }
  const std::string& label() const { return label_; }
  double domain_max() const { return opts_.domain_max; }

  Values eval(double s) const {
    if (!(s >= 0.0)) throw DomainError("nonlinearity evaluated at negative s = " + detail::shortest(s));
    if (family_ == Family::Custom) {
      if (s > opts_.domain_max) throw DomainError("s outside the declared domain of " + label_);
      Values v{custom_->f(s), custom_->fprime(s), custom_->F(s)};
      v.fprime_unbounded = !std::isfinite(v.fprime);
      return v;
    }
    const double sign = family_ == Family::PowerSum ? 1.0 : -1.0;
    Values v{};
    v.f = std::pow(s, p_) + sign * std::pow(s, q_);
    v.F = std::pow(s, p_ + 1.0) / (p_ + 1.0) + sign * std::pow(s, q_ + 1.0) / (q_ + 1.0);
    if (s == 0.0) {
      // p > q, so the q-term decides the behaviour at the origin.
      if (q_ < 1.0) {
        v.fprime = sign * std::numeric_limits<double>::infinity();
        v.fprime_unbounded = true;
      } else {
        v.fprime = q_ == 1.0 ? sign : 0.0;
        if (p_ == 1.0) v.fprime += 1.0;
      }
    } else {
      v.fprime = p_ * std::pow(s, p_ - 1.0) + sign * q_ * std::pow(s, q_ - 1.0);
    }
    return v;
  }

  double f(double s) const {
    if (family_ == Family::Custom) return eval(s).f;
    if (!(s >= 0.0)) throw DomainError("nonlinearity evaluated at negative s");
    const double sign = family_ == Family::PowerSum ? 1.0 : -1.0;
    return std::pow(s, p_) + sign * std::pow(s, q_);
  }
  double fprime(double s) const { return eval(s).fprime; }
  double F(double s) const { return eval(s).F; }

  // Right-hand side used by the integrator. Trajectories can step slightly
  // below u = 0 before a zero is polished, so f is continued as an odd function.
  double f_extended(double u) const { return u >= 0.0 ? f(u) : -f(-u); }

  // F/f with its limit 0 at s -> 0 when B = 0.
  double F_over_f(double s) const {
    if (landmarks().B == 0.0 && s < 1e-10) return 0.0;
    const Values v = eval(s);
    return v.F / v.f;
  }

  // (F/f)'(s) = 1 - F f' / f².
  double F_over_f_prime(double s) const {
    const Values v = eval(s);
    return 1.0 - v.F * v.fprime / (v.f * v.f);
  }

  const Landmarks& landmarks() const {
    if (!landmarks_) throw StructureError(landmark_error_);
    return *landmarks_;
  }
  bool has_valid_landmarks() const { return landmarks_.has_value(); }

  bool same_as(const Nonlinearity& other) const {
    return family_ == other.family_ && label_ == other.label_;
  }

 private:
  struct CustomFns {
    Fn f;
    Fn fprime;
    Fn F;
  };

  Nonlinearity() = default;

  static Nonlinearity powers(Family family, double p, double q) {
    if (!(q > 0.0) || !std::isfinite(p)) throw DomainError("power nonlinearity needs q > 0 and finite p");
    if (p == q) throw DomainError("power nonlinearity needs p != q (got p = q = " + detail::shortest(p) + ")");
    if (!(p > q)) throw DomainError("power nonlinearity needs p > q");
    Nonlinearity nl;
    nl.family_ = family;
    nl.p_ = p;
    nl.q_ = q;
    nl.label_ = std::string(family == Family::PowerSum ? "plus" : "minus") + ":p=" + detail::shortest(p) +
                ",q=" + detail::shortest(q);
    if (family == Family::PowerSum) {
      nl.landmarks_ = Landmarks{0.0, 0.0, false};
    } else {
      // f(1) = 0 and F(β) = 0 in closed form.
      nl.landmarks_ = Landmarks{1.0, std::pow((p + 1.0) / (q + 1.0), 1.0 / (p - q)), true};
    }
    return nl;
  }

  void validate_antiderivative() const {
    const double hi = std::min(opts_.domain_max, 100.0);
    const double lo = std::min(1e-3, hi / 10.0);
    for (double s : detail::geometric_grid(lo, hi, 8)) {
      const double integral =
          boost::math::quadrature::gauss_kronrod<double, 31>::integrate(custom_->f, 0.0, s, 15, 1e-13);
      const double F = custom_->F(s);
      if (std::fabs(F - integral) > opts_.antiderivative_tol * std::max(1.0, std::fabs(F))) {
        throw DomainError("custom F is not the antiderivative of f at s = " + detail::shortest(s) + " (" + label_ + ")");
      }
    }
  }

  // Sign structure required by (f2): f < 0 just above 0 and f <= 0 up to a
  // single sign change at B, f > 0 above; or f > 0 on (0, ∞).
  void compute_landmarks() {
    const double hi = std::min(opts_.domain_max, 1e6);
    const auto grid = detail::geometric_grid(1e-9, hi, 32);
    std::vector<double> vals;
    vals.reserve(grid.size());
    for (double s : grid) vals.push_back(custom_->f(s));

    if (vals.back() <= 0.0) {
      landmark_error_ = "f is not positive for large s (" + label_ + "): violates (f2), f must be positive above B";
      return;
    }
    if (vals.front() > 0.0) {
      for (double v : vals) {
        if (v <= 0.0) {
          landmark_error_ = "f changes sign after being positive near 0 (" + label_ +
                            "): violates (f2), f must be <= 0 on [0, B]";
          return;
        }
      }
      landmarks_ = Landmarks{0.0, 0.0, false};
      return;
    }
    std::size_t change = 0;
    int changes = 0;
    for (std::size_t k = 1; k < vals.size(); ++k) {
      if ((vals[k - 1] > 0.0) != (vals[k] > 0.0)) {
        ++changes;
        change = k;
      }
    }
    if (changes != 1) {
      landmark_error_ = "f has " + std::to_string(changes) + " sign changes (" + label_ +
                        "): only a single sign change at B is supported";
      return;
    }
    const double B = roots::find_root(custom_->f, grid[change - 1], grid[change], kLandmarkTol);
    auto F = custom_->F;
    if (F(B) >= 0.0) {
      landmark_error_ = "F(B) >= 0 (" + label_ + "): violates (f2), f must be negative near 0";
      return;
    }
    const auto fgrid = detail::geometric_grid(B, hi, 32);
    for (std::size_t k = 1; k < fgrid.size(); ++k) {
      if (F(fgrid[k]) > 0.0) {
        const double beta = roots::find_root(F, fgrid[k - 1], fgrid[k], kLandmarkTol);
        landmarks_ = Landmarks{B, beta, true};
        return;
      }
    }
    landmark_error_ = "F has no zero above B (" + label_ + "): violates (f2), F must return to zero above B";
  }

  Family family_ = Family::Custom;
  double p_ = 0.0;
  double q_ = 0.0;
  std::string label_;
  std::shared_ptr<const CustomFns> custom_;
  CustomOptions opts_;
  std::optional<Landmarks> landmarks_;
  std::string landmark_error_;
};

inline const Landmarks& landmarks(const Nonlinearity& nl) { return nl.landmarks(); }

}  // namespace annulus
