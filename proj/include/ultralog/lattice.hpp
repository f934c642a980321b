#pragma once

// Unimodular F_s[X]-lattices in k^r and their reduction.
//
// A lattice is given by an r x r basis matrix over k whose columns generate it
// over Z = F_s[X]. Norms are sup-norms, always integer powers of s, so every
// length in this module is carried as its base-s logarithm.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ultralog/ffield.hpp"

namespace ultralog {

/// Dense polynomial matrix, column-major.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(const Field& f, int rows, int cols);
  static PolyMatrix identity(const Field& f, int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Field& field() const { return *f_; }
  Poly& operator()(int r, int c) { return data_[static_cast<std::size_t>(c * rows_ + r)]; }
  const Poly& operator()(int r, int c) const { return data_[static_cast<std::size_t>(c * rows_ + r)]; }
  std::span<const Poly> column(int c) const {
    return {data_.data() + static_cast<std::size_t>(c * rows_), static_cast<std::size_t>(rows_)};
  }
  /// max degree of a column (-1 for a zero column).
  int column_degree(int c) const;

  friend PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b);
  bool operator==(const PolyMatrix& o) const = default;

 private:
  const Field* f_ = nullptr;
  int rows_ = 0, cols_ = 0;
  std::vector<Poly> data_;
};

/// Fraction-free (Bareiss) determinant.
Poly determinant(const PolyMatrix& m);

/// Basis of a full-rank lattice; columns are the generators.
class LatticeBasis {
 public:
  LatticeBasis() = default;
  /// Row-major entries. Throws std::invalid_argument on shape mismatch or a
  /// column that is known to be zero.
  LatticeBasis(const Field& f, int rank, std::vector<LaurentSeries> row_major);
  static LatticeBasis standard(const Field& f, int rank);
  static LatticeBasis from_poly(const PolyMatrix& m);

  const Field& field() const { return *f_; }
  int rank() const { return rank_; }
  const LaurentSeries& operator()(int r, int c) const { return e_[static_cast<std::size_t>(r * rank_ + c)]; }
  /// Minimum window over entries (kInfinitePrecision if all exact).
  int precision() const;
  bool all_exact() const;
  /// Whether |det| = 1, decided from the entries (Leibniz expansion, rank <= 6).
  bool unimodular() const;

  /// Left multiplication by diag(X^{e_1}, ..., X^{e_r}).
  LatticeBasis diagonal_action(std::span<const int> exponents) const;
  /// Multiply every entry by X^c.
  LatticeBasis scaled(int c) const;
  /// Right multiplication by a polynomial matrix (a change of basis when unimodular).
  LatticeBasis times(const PolyMatrix& u) const;

  std::string to_text() const;
  static LatticeBasis parse(const Field& f, std::string_view text);

 private:
  const Field* f_ = nullptr;
  int rank_ = 0;
  std::vector<LaurentSeries> e_;
};

/// Leibniz determinant over k (rank <= 6).
LaurentSeries determinant(const LatticeBasis& b);

struct ReducedBasis {
  PolyMatrix matrix;               // weak Popov form of the scaled basis
  int scale = 0;                   // the basis was multiplied by X^scale
  std::vector<int> column_degrees;
  std::vector<int> pivot_rows;
  PolyMatrix transform;            // scaled basis * transform = matrix (when tracked)
  bool certified = true;           // truncation cannot have changed the column norms
  int precision_shortfall = 0;     // extra digits needed when not certified
};

/// Column weak Popov form by Mulders-Storjohann reduction. The pivot of a
/// column is the lowest row index attaining its degree. Throws
/// std::domain_error when the columns are dependent.
ReducedBasis weak_popov(PolyMatrix m, bool track_transform = false);

/// Scale by X^M, drop the fractional tails and reduce. The certificate holds
/// when every transform column u_i satisfies deg u_i <= d_i, which bounds the
/// dropped tail strictly below each reduced column norm.
ReducedBasis reduce(const LatticeBasis& b);

struct DeltaValue {
  int value = 0;
  bool certified = false;
};

/// Delta(L) = max over nonzero v of log_s 1/|v|. Throws PrecisionError when the
/// value is not certified and `require_certified` is set.
DeltaValue delta(const LatticeBasis& b, bool require_certified = true);

/// Sorted log_s of the successive minima.
std::vector<int> successive_minima(const LatticeBasis& b);

/// Visits every nonzero lattice vector of norm <= s^{norm_exponent}. The search
/// box for coefficient vectors comes from |B^{-1}| = |adj B| / |det B|. Exact
/// entries only. Throws std::length_error when the box exceeds `cap` points.
void for_each_short_vector(const LatticeBasis& b, int norm_exponent, std::size_t cap,
                           const std::function<void(const std::vector<Poly>& coeffs,
                                                    const std::vector<LaurentSeries>& v)>& visit);

std::vector<std::vector<LaurentSeries>> enumerate_short_vectors(const LatticeBasis& b, int norm_exponent,
                                                                std::size_t cap = 4'000'000);

/// Brute-force log_s of the shortest nonzero vector.
int shortest_norm_by_enumeration(const LatticeBasis& b, std::size_t cap = 4'000'000);

/// log_s |v| for a coordinate vector (sup norm).
int norm_exponent(std::span<const LaurentSeries> v);

}  // namespace ultralog
