#pragma once

// Sampled measurement records shared by the simulators and the fitters.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ringqed/error.hpp"

namespace ringqed {

enum class SpectrumKind { transmission, counts };

inline std::string_view to_string(SpectrumKind k) { return k == SpectrumKind::counts ? "counts" : "transmission"; }

struct Spectrum {
  std::vector<double> wavelength_nm;
  std::vector<double> values;
  SpectrumKind kind = SpectrumKind::transmission;

  std::size_t size() const { return wavelength_nm.size(); }

  void validate() const {
    require(wavelength_nm.size() == values.size(), ErrorKind::DomainError,
            "spectrum axis and values differ in length");
    for (std::size_t i = 0; i < size(); ++i) {
      require(std::isfinite(wavelength_nm[i]) && std::isfinite(values[i]), ErrorKind::DomainError,
              "spectrum sample " + std::to_string(i) + " is not finite");
      if (i > 0)
        require(wavelength_nm[i] > wavelength_nm[i - 1], ErrorKind::NonMonotonicAxis,
                "wavelength axis not strictly ascending at sample " + std::to_string(i));
    }
  }

  bool operator==(const Spectrum&) const = default;
};

namespace detail {
inline void validate_binned(const std::vector<double>& edges, const std::vector<double>& counts) {
  require(!counts.empty(), ErrorKind::EmptyGrid, "histogram has no bins");
  require(edges.size() == counts.size() + 1, ErrorKind::DomainError, "histogram needs one more edge than bins");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    require(std::isfinite(edges[i]), ErrorKind::DomainError, "histogram edge is not finite");
    if (i > 0) require(edges[i] > edges[i - 1], ErrorKind::NonMonotonicAxis, "histogram edges not increasing");
  }
  for (double c : counts) require(std::isfinite(c) && c >= 0.0, ErrorKind::DomainError, "histogram counts must be >= 0");
}
}  // namespace detail

/// Time-resolved photoluminescence histogram. Times in ns.
struct DecayHistogram {
  std::vector<double> bin_edges_ns;
  std::vector<double> counts;
  double irf_sigma_ns = 0.0;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const { return 0.5 * (bin_edges_ns[i] + bin_edges_ns[i + 1]); }

  void validate() const {
    detail::validate_binned(bin_edges_ns, counts);
    require(std::isfinite(irf_sigma_ns) && irf_sigma_ns >= 0.0, ErrorKind::DomainError, "irf sigma must be >= 0");
  }

  bool operator==(const DecayHistogram&) const = default;
};

/// Coincidence histogram versus delay. Times in ns.
struct CorrelationHistogram {
  std::vector<double> bin_edges_ns;
  std::vector<double> counts;
  double repetition_period_ns = 12.5;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const { return 0.5 * (bin_edges_ns[i] + bin_edges_ns[i + 1]); }

  void validate() const {
    detail::validate_binned(bin_edges_ns, counts);
    require(repetition_period_ns > 0.0, ErrorKind::DomainError, "repetition period must be > 0");
    const double span = bin_edges_ns.back() - bin_edges_ns.front();
    require(std::abs(bin_edges_ns.front() + bin_edges_ns.back()) <= 1e-9 * span, ErrorKind::DomainError,
            "correlation histogram range must be symmetric about zero delay");
  }

  bool operator==(const CorrelationHistogram&) const = default;
};

/// Uniform bin edges covering [lo, hi].
inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  require(bins > 0 && hi > lo, ErrorKind::EmptyGrid, "uniform_edges needs bins > 0 and hi > lo");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return e;
}

}  // namespace ringqed
