#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace arrowhead {

enum class DisorderKind { Box, Custom };

struct DensityTriplet {
  double rho = 0.0;
  double hilbert = 0.0;        // rho~(w) = p.v. (1/pi) int rho(x) / (w - x) dx
  double hilbert_deriv = 0.0;  // d rho~ / dw
};

// Distribution of bare energies on a compact support [lo, hi].
// Immutable after construction; safe to share between threads.
class DisorderModel {
 public:
  using Fn = std::function<double(double)>;

  // Ingredients of a user-defined distribution. Only `density` is required;
  // missing pieces fall back to quadrature (hilbert, hilbert_deriv, cdf) or to
  // a central difference (density_deriv). Without inverse_cdf the model
  // cannot be sampled.
  struct CustomSpec {
    double lo = 0.0;
    double hi = 1.0;
    Fn density;
    Fn hilbert;
    Fn hilbert_deriv;
    Fn density_deriv;
    Fn cdf;
    Fn inverse_cdf;
    bool symmetric = false;  // rho(c + x) == rho(c - x) about the midpoint
    std::string label = "custom";
  };

  static DisorderModel box(double width);
  static DisorderModel custom(CustomSpec spec);

  DisorderKind kind() const noexcept { return kind_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double width() const noexcept { return hi_ - lo_; }
  double scale() const noexcept;  // max(|lo|, |hi|)
  bool symmetric() const noexcept { return symmetric_; }
  bool has_sampler() const noexcept;
  const std::string& label() const noexcept;

  bool inside(double w) const noexcept { return w > lo_ && w < hi_; }

  double density(double w) const;
  double density_deriv(double w) const;
  // Throws EdgeSingularityError within 1e-13 * width of a support edge where
  // the density jumps (box, or a custom density that does not vanish there).
  double hilbert(double w) const;
  double hilbert_deriv(double w) const;
  DensityTriplet triplet(double w) const;
  double cdf(double w) const;
  double inverse_cdf(double u) const;

  // Box only: rho~ at hi + delta (delta > 0) without forming hi + delta.
  double box_hilbert_above(double delta) const;

 private:
  struct Custom;
  DisorderModel() = default;
  void check_edge(double w) const;

  DisorderKind kind_ = DisorderKind::Box;
  double lo_ = -0.5;
  double hi_ = 0.5;
  bool symmetric_ = true;
  bool edge_jump_ = true;
  std::shared_ptr<const Custom> custom_;
};

// Semicircle density of radius W/2 with closed-form Hilbert transform, cdf
// and a root-finding sampler; a ready-made non-box model.
DisorderModel semicircle_model(double width);

struct BareEnergies {
  std::vector<double> values;
  bool sorted = false;
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return values.size(); }
};

// N i.i.d. draws from rho, returned in draw order (unsorted).
BareEnergies sample_bare_energies(const DisorderModel& model, std::size_t n, std::uint64_t seed);

BareEnergies sorted(BareEnergies e);

// Deterministic grid with w_{a+1} - w_a = 1 / (N rho((w_{a+1} + w_a)/2)).
// The free offset is fixed by requiring equal probability mass below the
// first and above the last point.
BareEnergies equally_spaced_grid(const DisorderModel& model, std::size_t n);

// One value per line, 17 significant digits.
std::string bare_energies_csv(const BareEnergies& e);

}  // namespace arrowhead
