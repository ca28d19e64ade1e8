#pragma once

// Material tensors in Voigt notation and crystal-frame rotation.
//
// Voigt order is (xx, yy, zz, yz, xz, xy). Stress vectors carry the plain
// tensor components; strain vectors use engineering shear (gamma = 2 * eps)
// so that strain = S * stress holds with the usual compliance matrix.

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ringqed/error.hpp"
#include "ringqed/keyvalue.hpp"

namespace ringqed {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix36 = Eigen::Matrix<double, 3, 6>;

namespace voigt {

/// Tensor index pair for each Voigt slot.
inline constexpr std::array<std::pair<int, int>, 6> pairs{{{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

inline int slot(int i, int j) {
  if (i == j) return i;
  const int k = i + j;  // (1,2)->3, (0,2)->2, (0,1)->1
  return k == 3 ? 3 : (k == 2 ? 4 : 5);
}

inline Vector6 from_stress(const Matrix3& t) {
  Vector6 v;
  for (int s = 0; s < 6; ++s) v(s) = t(pairs[s].first, pairs[s].second);
  return v;
}

inline Matrix3 to_stress(const Vector6& v) {
  Matrix3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = v(slot(i, j));
  return t;
}

inline Vector6 from_strain(const Matrix3& t) {
  Vector6 v = from_stress(t);
  v.tail<3>() *= 2.0;
  return v;
}

inline Matrix3 to_strain(const Vector6& v) {
  Vector6 w = v;
  w.tail<3>() *= 0.5;
  return to_stress(w);
}

}  // namespace voigt

/// 6x6 compliance S, 1/Pa.
class ElasticCompliance {
 public:
  explicit ElasticCompliance(const Matrix6& s) : s_(s) {
    require(s_.allFinite(), ErrorKind::DomainError, "compliance has non-finite entries");
    const double scale = s_.cwiseAbs().maxCoeff();
    require(scale > 0.0, ErrorKind::DomainError, "compliance is identically zero");
    require((s_ - s_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::DomainError,
            "compliance is not symmetric");
    Eigen::LLT<Matrix6> llt(s_ / scale);
    require(llt.info() == Eigen::Success, ErrorKind::DomainError, "compliance is not positive definite");
  }

  static ElasticCompliance cubic(double s11, double s12, double s44) {
    Matrix6 s = Matrix6::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s(i, j) = (i == j) ? s11 : s12;
    for (int i = 3; i < 6; ++i) s(i, i) = s44;
    return ElasticCompliance(s);
  }

  /// True when S has the cubic pattern: three independent values s11, s12, s44.
  bool has_cubic_pattern(double rel_tol = 1e-12) const {
    const double tol = rel_tol * s_.cwiseAbs().maxCoeff();
    const double s11 = s_(0, 0), s12 = s_(0, 1), s44 = s_(3, 3);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        double expect = 0.0;
        if (i < 3 && j < 3) expect = (i == j) ? s11 : s12;
        if (i >= 3 && i == j) expect = s44;
        if (std::abs(s_(i, j) - expect) > tol) return false;
      }
    return true;
  }

  const Matrix6& matrix() const { return s_; }

 private:
  Matrix6 s_;
};

/// Piezoelectric stress-charge tensor e (3x6), C/m^2.
class PiezoTensor {
 public:
  explicit PiezoTensor(const Matrix36& e) : e_(e) {
    require(e_.allFinite(), ErrorKind::DomainError, "piezo tensor has non-finite entries");
  }

  /// Trigonal class 3m (LiNbO3, mirror plane normal to crystal X).
  static PiezoTensor trigonal_3m(double e15, double e22, double e31, double e33) {
    Matrix36 e = Matrix36::Zero();
    e(0, 4) = e15;
    e(0, 5) = -e22;
    e(1, 0) = -e22;
    e(1, 1) = e22;
    e(1, 3) = e15;
    e(2, 0) = e31;
    e(2, 1) = e31;
    e(2, 2) = e33;
    return PiezoTensor(e);
  }

  /// Exact zero/sign relations of class 3m.
  bool has_3m_pattern() const {
    const auto r = trigonal_3m(e_(0, 4), e_(1, 1), e_(2, 0), e_(2, 2)).matrix();
    return r == e_;
  }

  const Matrix36& matrix() const { return e_; }

 private:
  Matrix36 e_;
};

/// Stress bond matrix M: Voigt(A sigma A^T) = M * Voigt(sigma).
inline Matrix6 bond_matrix_from_rotation(const Matrix3& a) {
  require(a.allFinite(), ErrorKind::NonOrthogonalRotation, "rotation has non-finite entries");
  const double orth = (a.transpose() * a - Matrix3::Identity()).cwiseAbs().maxCoeff();
  require(orth <= 1e-9, ErrorKind::NonOrthogonalRotation,
          "A^T A deviates from identity by " + kv::format_double(orth, 3));
  require(std::abs(a.determinant() - 1.0) <= 1e-9, ErrorKind::NonOrthogonalRotation,
          "det(A) = " + kv::format_double(a.determinant(), 6) + ", expected +1");

  Matrix6 m;
  for (int row = 0; row < 6; ++row) {
    const auto [i, j] = voigt::pairs[row];
    for (int col = 0; col < 6; ++col) {
      const auto [k, l] = voigt::pairs[col];
      m(row, col) = a(i, k) * a(j, l) + (k != l ? a(i, l) * a(j, k) : 0.0);
    }
  }
  return m;
}

/// Crystal -> device rotation A together with its stress bond matrix M.
class FrameRotation {
 public:
  explicit FrameRotation(const Matrix3& a) : a_(a), m_(bond_matrix_from_rotation(a)) {}

  static FrameRotation identity() { return FrameRotation(Matrix3::Identity()); }

  /// Active rotation by `angle` (rad) about a crystal axis (0 = X, 1 = Y, 2 = Z).
  static FrameRotation about_axis(int axis, double angle) {
    const Vector3 n = Vector3::Unit(axis);
    return FrameRotation(Eigen::AngleAxisd(angle, n).toRotationMatrix());
  }

  /// Device frame for x-cut LN: device x along crystal X (wafer normal),
  /// device z along crystal Z (the c-axis, along which the tuning field is
  /// applied), device y = z cross x along crystal Y. A is therefore the
  /// identity:
  ///
  ///   A = | 1 0 0 |
  ///       | 0 1 0 |
  ///       | 0 0 1 |
  static FrameRotation xcut_device_frame() { return identity(); }

  /// This rotation followed by `next`.
  FrameRotation then(const FrameRotation& next) const { return FrameRotation(next.a_ * a_); }

  FrameRotation inverse() const { return FrameRotation(a_.transpose()); }

  const Matrix3& a() const { return a_; }
  const Matrix6& m() const { return m_; }

 private:
  Matrix3 a_;
  Matrix6 m_;
};

/// e_device = A e_crystal M^T.
inline PiezoTensor rotate_piezo_to_xcut(const PiezoTensor& e_z, const FrameRotation& frame) {
  return PiezoTensor(frame.a() * e_z.matrix() * frame.m().transpose());
}

/// GaAs deformation potentials, eV.
struct DeformationPotentials {
  double a_c = 0.0;
  double a_v = 0.0;
  double b = 0.0;
  double d = 0.0;

  void validate() const {
    require(std::isfinite(a_c) && std::isfinite(a_v) && std::isfinite(b) && std::isfinite(d),
            ErrorKind::DomainError, "deformation potentials must be finite");
  }
};

struct MaterialSet {
  ElasticCompliance gaas_compliance;
  PiezoTensor ln_piezo_zcut;
  DeformationPotentials gaas_potentials;
};

/// Materials database schema:
///
///   [gaas]
///   compliance_per_Pa = [ 6 rows x 6 columns ]
///   a_c_eV = ...
///   a_v_eV = ...
///   b_eV = ...
///   d_eV = ...
///   [lithium_niobate]
///   piezo_zcut_C_per_m2 = [ 3 rows x 6 columns ]
///
/// Optional `source` keys are free text. GaAs compliance must be cubic, the
/// LN tensor must satisfy the 3m pattern exactly, and b, d must be negative.
inline MaterialSet parse_material_database(const kv::Document& doc) {
  doc.reject_unknown_sections({"gaas", "lithium_niobate"});
  const auto& gaas = doc.section("gaas");
  gaas.reject_unknown({"source", "compliance_per_Pa", "a_c_eV", "a_v_eV", "b_eV", "d_eV"});
  const auto& ln = doc.section("lithium_niobate");
  ln.reject_unknown({"source", "piezo_zcut_C_per_m2"});

  Matrix6 s;
  const auto rows = gaas.matrix("compliance_per_Pa", 6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) s(i, j) = rows[i][j];

  Matrix36 e;
  const auto erows = ln.matrix("piezo_zcut_C_per_m2", 3, 6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) e(i, j) = erows[i][j];

  const int sline = gaas.entry("compliance_per_Pa").line;
  auto compliance = [&] {
    try {
      return ElasticCompliance(s);
    } catch (const Error& err) {
      gaas.error_at(sline, err.what());
    }
  }();
  if (!compliance.has_cubic_pattern()) gaas.error_at(sline, "GaAs compliance does not have the cubic pattern");

  PiezoTensor piezo(e);
  if (!piezo.has_3m_pattern())
    ln.error_at(ln.entry("piezo_zcut_C_per_m2").line, "LN piezo tensor violates the trigonal 3m pattern");

  DeformationPotentials pot{gaas.number("a_c_eV"), gaas.number("a_v_eV"), gaas.number("b_eV"), gaas.number("d_eV")};
  pot.validate();
  if (!(pot.b < 0.0)) gaas.error_at(gaas.entry("b_eV").line, "GaAs b must be negative");
  if (!(pot.d < 0.0)) gaas.error_at(gaas.entry("d_eV").line, "GaAs d must be negative");

  return MaterialSet{compliance, piezo, pot};
}

inline MaterialSet load_material_database(const std::filesystem::path& path) {
  return parse_material_database(kv::read_file(path));
}

}  // namespace ringqed
