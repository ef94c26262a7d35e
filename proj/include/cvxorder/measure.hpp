#ifndef CVXORDER_MEASURE_HPP
#define CVXORDER_MEASURE_HPP

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/rng.hpp"

namespace cvxorder {

// Finitely supported probability measure on R^d. One atom per row of
// `points`; `weights` are nonnegative and sum to one (renormalized at
// construction to within 1e-12). Duplicate atoms are allowed and kept.
struct DiscreteMeasure {
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

inline DiscreteMeasure make_discrete(Eigen::MatrixXd points, Eigen::VectorXd weights) {
  if (points.rows() == 0) throw invalid_input("measure needs at least one atom");
  if (points.cols() == 0) throw invalid_input("measure needs dimension >= 1");
  if (weights.size() != points.rows())
    throw dimension_mismatch("weight count does not match atom count");
  if (!points.allFinite() || !weights.allFinite())
    throw invalid_input("measure has non-finite entries");
  if ((weights.array() < 0.0).any()) throw invalid_input("negative weight");
  const double total = weights.sum();
  if (!(total > 0.0)) throw invalid_input("weights have zero total mass");
  // Skip the division when the mass is already 1 up to accumulated rounding;
  // renormalizing would shift every weight by an ulp, so normalization would
  // not be idempotent and serialized measures would not round-trip.
  const double slack =
      64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(weights.size());
  if (std::abs(total - 1.0) > slack) weights /= total;
  return DiscreteMeasure{std::move(points), std::move(weights)};
}

inline DiscreteMeasure empirical_from_samples(Eigen::MatrixXd samples) {
  const Eigen::Index n = samples.rows();
  if (n == 0) throw invalid_input("empirical measure needs at least one sample");
  return make_discrete(std::move(samples), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

inline Eigen::VectorXd barycenter(const DiscreteMeasure& m) {
  return m.points.transpose() * m.weights;
}

// Sum_i w_i * sum_k |x_ik|^5, the fifth absolute moment taken coordinatewise.
inline double moment5(const DiscreteMeasure& m) {
  return (m.points.array().abs().pow(5).rowwise().sum() * m.weights.array()).sum();
}

// Largest pairwise Euclidean distance over the union of both supports.
inline double diameter(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw dimension_mismatch("diameter: dimension mismatch");
  Eigen::MatrixXd all(a.size() + b.size(), a.dim());
  all << a.points, b.points;
  double best = 0.0;
  for (Eigen::Index i = 0; i < all.rows(); ++i)
    for (Eigen::Index j = i + 1; j < all.rows(); ++j)
      best = std::max(best, (all.row(i) - all.row(j)).norm());
  return best;
}

inline DiscreteMeasure affine_map(const DiscreteMeasure& m, const Eigen::MatrixXd& map,
                                  const Eigen::VectorXd& shift) {
  if (map.cols() != m.dim()) throw dimension_mismatch("affine_map: matrix columns != dimension");
  if (shift.size() != map.rows()) throw dimension_mismatch("affine_map: shift size != matrix rows");
  Eigen::MatrixXd moved = m.points * map.transpose();
  moved.rowwise() += shift.transpose();
  return DiscreteMeasure{std::move(moved), m.weights};
}

namespace detail {

// Lower Cholesky factor of a symmetric positive semidefinite matrix.
// Pivots within `tol` of zero are treated as exactly zero (rank-deficient
// covariances are legal); pivots below -tol reject the matrix.
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& cov, double tol = 1e-10) {
  const Eigen::Index d = cov.rows();
  if (cov.cols() != d) throw invalid_input("covariance must be square");
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  if (((cov - cov.transpose()).cwiseAbs().maxCoeff()) > tol * scale)
    throw invalid_input("covariance must be symmetric");
  Eigen::MatrixXd fac = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = cov(j, j) - fac.row(j).head(j).squaredNorm();
    if (pivot < -tol * scale) throw invalid_input("covariance not positive semidefinite");
    if (pivot <= tol * scale) continue;  // column stays zero
    fac(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i)
      fac(i, j) = (cov(i, j) - fac.row(i).head(j).dot(fac.row(j).head(j))) / fac(j, j);
  }
  return fac;
}

}  // namespace detail

struct UniformBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

class SampleFamily;

// Law of X + Z where X follows `base` and Z is an independent centered
// Gaussian with the given covariance.
struct GaussianConvolution {
  std::shared_ptr<const SampleFamily> base;
  Eigen::MatrixXd cov;
};

class SampleFamily {
 public:
  SampleFamily(UniformBox f) : v_(std::move(f)) {}       // NOLINT(google-explicit-constructor)
  SampleFamily(GaussianLaw f) : v_(std::move(f)) {}      // NOLINT(google-explicit-constructor)
  SampleFamily(GaussianConvolution f) : v_(std::move(f)) {}  // NOLINT(google-explicit-constructor)

  const std::variant<UniformBox, GaussianLaw, GaussianConvolution>& value() const { return v_; }

  Eigen::Index dim() const {
    if (const auto* u = std::get_if<UniformBox>(&v_)) return u->lo.size();
    if (const auto* g = std::get_if<GaussianLaw>(&v_)) return g->mean.size();
    return std::get<GaussianConvolution>(v_).base->dim();
  }

 private:
  std::variant<UniformBox, GaussianLaw, GaussianConvolution> v_;
};

inline SampleFamily convolved_with_gaussian(SampleFamily base, Eigen::MatrixXd cov) {
  return SampleFamily(GaussianConvolution{
      std::make_shared<const SampleFamily>(std::move(base)), std::move(cov)});
}

namespace detail {

inline void draw_rows(const SampleFamily& family, Eigen::MatrixXd& out, Rng& rng) {
  if (const auto* box = std::get_if<UniformBox>(&family.value())) {
    if (box->lo.size() != box->hi.size())
      throw dimension_mismatch("uniform box: lo/hi size mismatch");
    if ((box->hi.array() < box->lo.array()).any())
      throw invalid_input("uniform box: hi < lo");
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index k = 0; k < out.cols(); ++k)
        out(i, k) = rng.uniform((box->lo)(k), (box->hi)(k));
    return;
  }
  if (const auto* gauss = std::get_if<GaussianLaw>(&family.value())) {
    if (gauss->cov.rows() != gauss->mean.size())
      throw dimension_mismatch("gaussian: covariance size != mean size");
    const Eigen::MatrixXd fac = psd_cholesky(gauss->cov);
    Eigen::VectorXd z(out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
      out.row(i) = (gauss->mean + fac * z).transpose();
    }
    return;
  }
  const auto& conv = std::get<GaussianConvolution>(family.value());
  if (conv.cov.rows() != conv.base->dim())
    throw dimension_mismatch("convolution: covariance size != base dimension");
  draw_rows(*conv.base, out, rng);
  const Eigen::MatrixXd fac = psd_cholesky(conv.cov);
  Eigen::VectorXd z(out.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
    out.row(i) += (fac * z).transpose();
  }
}

}  // namespace detail

// n independent draws, one per row. A fixed seed fixes every byte of the
// result; the draw order is row-major and independent of thread count.
inline Eigen::MatrixXd sample(const SampleFamily& family, Eigen::Index n, std::uint64_t seed) {
  if (n <= 0) throw invalid_input("sample: need n >= 1");
  const Eigen::Index d = family.dim();
  if (d <= 0) throw invalid_input("sample: need dimension >= 1");
  Eigen::MatrixXd out(n, d);
  Rng rng(seed);
  detail::draw_rows(family, out, rng);
  return out;
}

// Gaussian smoothing by atom replication: each atom of `m` becomes `r`
// draws from N(atom, sigma^2 I), each carrying weight w_i / r. Total mass
// is preserved exactly.
inline DiscreteMeasure smooth(const DiscreteMeasure& m, double sigma, Eigen::Index r,
                              std::uint64_t seed) {
  if (r <= 0) throw invalid_input("smooth: need r >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw invalid_input("smooth: bad sigma");
  Eigen::MatrixXd points(m.size() * r, m.dim());
  Eigen::VectorXd weights(m.size() * r);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (Eigen::Index rep = 0; rep < r; ++rep) {
      const Eigen::Index row = i * r + rep;
      for (Eigen::Index k = 0; k < m.dim(); ++k)
        points(row, k) = m.points(i, k) + sigma * rng.normal();
      weights(row) = m.weights(i) / static_cast<double>(r);
    }
  }
  return DiscreteMeasure{std::move(points), std::move(weights)};
}

// --- CSV serialization -----------------------------------------------------
//
// Format: header "x1,...,xd,weight", one atom per row, shortest-exact doubles.
// On read the weight column may be absent, in which case atoms get uniform
// weight.

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw invalid_input("csv: bad numeric field '" + token + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const DiscreteMeasure& m) {
  for (Eigen::Index k = 0; k < m.dim(); ++k) os << "x" << (k + 1) << ",";
  os << "weight\n";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (Eigen::Index k = 0; k < m.dim(); ++k)
      os << detail::format_double(m.points(i, k)) << ",";
    os << detail::format_double(m.weights(i)) << "\n";
  }
}

inline void write_csv(const std::string& path, const DiscreteMeasure& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw invalid_input("cannot open for writing: " + path);
  write_csv(os, m);
}

inline DiscreteMeasure read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw invalid_input("csv: empty input");
  const auto header = detail::split_csv_line(line);
  Eigen::Index d = static_cast<Eigen::Index>(header.size());
  bool has_weight = !header.empty() && header.back() == "weight";
  if (has_weight) --d;
  if (d < 1) throw invalid_input("csv: no coordinate columns");
  for (Eigen::Index k = 0; k < d; ++k)
    if (header[static_cast<std::size_t>(k)] != "x" + std::to_string(k + 1))
      throw invalid_input("csv: bad header column '" + header[static_cast<std::size_t>(k)] + "'");

  std::vector<double> coords;
  std::vector<double> weights;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != d + (has_weight ? 1 : 0))
      throw invalid_input("csv: row has wrong field count");
    for (Eigen::Index k = 0; k < d; ++k)
      coords.push_back(detail::parse_double(fields[static_cast<std::size_t>(k)]));
    if (has_weight) weights.push_back(detail::parse_double(fields.back()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(coords.size()) / d;
  if (n == 0) throw invalid_input("csv: no data rows");
  Eigen::MatrixXd points(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      points(i, k) = coords[static_cast<std::size_t>(i * d + k)];
  Eigen::VectorXd w;
  if (has_weight)
    w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  else
    w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return make_discrete(std::move(points), std::move(w));
}

inline DiscreteMeasure read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open for reading: " + path);
  return read_csv(is);
}

}  // namespace cvxorder

#endif  // CVXORDER_MEASURE_HPP
