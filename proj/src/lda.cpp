#include "shapeprior/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace shapeprior {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0)) throw std::runtime_error("lda: degenerate direction");
  for (double& x : v) x /= n;
}

} // namespace

Matrix cholesky_lower(const Matrix& a) {
  const int d = a.rows;
  Matrix l(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
        l.at(i, j) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

void jacobi_eigen(const Matrix& a, std::vector<double>& eigenvalues,
                  Matrix& eigenvectors) {
  const int d = a.rows;
  Matrix m = a;
  Matrix v(d, d);
  for (int i = 0; i < d; ++i) v.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-26) break;

    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < d; ++k) {
          const double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int i, int j) { return m.at(i, i) > m.at(j, j); });
  eigenvalues.resize(d);
  eigenvectors = Matrix(d, d); // eigenvectors as columns, sorted
  for (int c = 0; c < d; ++c) {
    eigenvalues[c] = m.at(idx[c], idx[c]);
    for (int r = 0; r < d; ++r) eigenvectors.at(r, c) = v.at(r, idx[c]);
  }
}

std::array<double, 2> LdaProjection::project(const std::vector<double>& z) const {
  if (static_cast<int>(z.size()) != d)
    throw std::invalid_argument("lda_project: dimension mismatch");
  std::array<double, 2> uv{0.0, 0.0};
  for (int a = 0; a < 2; ++a)
    for (int i = 0; i < d; ++i) uv[a] += (z[i] - grand_mean[i]) * basis[a][i];
  return uv;
}

LdaProjection lda_fit(const std::vector<std::vector<double>>& latents,
                      const std::vector<std::string>& labels) {
  if (latents.size() != labels.size() || latents.empty())
    throw std::invalid_argument("lda_fit: latents/labels mismatch");
  const int d = static_cast<int>(latents[0].size());
  if (d < 2) throw std::invalid_argument("lda_fit: latent dimension must be >= 2");
  for (const auto& z : latents) {
    if (static_cast<int>(z.size()) != d)
      throw std::invalid_argument("lda_fit: inconsistent latent dimensions");
    for (const double v : z)
      if (!std::isfinite(v)) throw std::invalid_argument("lda_fit: non-finite latent");
  }

  std::map<std::string, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));
  if (by_class.size() < 2) throw std::invalid_argument("lda_fit: need >= 2 classes");
  for (const auto& [name, idx] : by_class)
    if (idx.size() < 2)
      throw std::invalid_argument("lda_fit: class " + name + " has < 2 samples");

  LdaProjection p;
  p.d = d;
  const int c_count = static_cast<int>(by_class.size());
  p.class_means = Matrix(c_count, d);
  p.grand_mean.assign(d, 0.0);

  int ci = 0;
  for (const auto& [name, idx] : by_class) {
    p.class_names.push_back(name);
    for (const int i : idx)
      for (int k = 0; k < d; ++k) p.class_means.at(ci, k) += latents[i][k];
    for (int k = 0; k < d; ++k) p.class_means.at(ci, k) /= static_cast<double>(idx.size());
    ++ci;
  }
  for (const auto& z : latents)
    for (int k = 0; k < d; ++k) p.grand_mean[k] += z[k];
  for (int k = 0; k < d; ++k) p.grand_mean[k] /= static_cast<double>(latents.size());

  Matrix sw(d, d), sb(d, d);
  ci = 0;
  for (const auto& [name, idx] : by_class) {
    for (const int i : idx) {
      for (int r = 0; r < d; ++r) {
        const double xr = latents[i][r] - p.class_means.at(ci, r);
        for (int c = r; c < d; ++c)
          sw.at(r, c) += xr * (latents[i][c] - p.class_means.at(ci, c));
      }
    }
    const double nc = static_cast<double>(idx.size());
    for (int r = 0; r < d; ++r) {
      const double mr = p.class_means.at(ci, r) - p.grand_mean[r];
      for (int c = r; c < d; ++c)
        sb.at(r, c) += nc * mr * (p.class_means.at(ci, c) - p.grand_mean[c]);
    }
    ++ci;
  }
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < r; ++c) {
      sw.at(r, c) = sw.at(c, r);
      sb.at(r, c) = sb.at(c, r);
    }

  double trace = 0.0;
  for (int r = 0; r < d; ++r) trace += sw.at(r, r);
  const double gamma = 1e-6 * trace / static_cast<double>(d);
  for (int r = 0; r < d; ++r) sw.at(r, r) += gamma > 0.0 ? gamma : 1e-12;

  // whiten: M = L^-1 Sb L^-T, eigenvectors u -> w = L^-T u
  const Matrix l = cholesky_lower(sw);
  auto forward_solve = [&](std::vector<double>& x) { // L x' = x
    for (int r = 0; r < d; ++r) {
      double s = x[r];
      for (int c = 0; c < r; ++c) s -= l.at(r, c) * x[c];
      x[r] = s / l.at(r, r);
    }
  };
  auto backward_solve = [&](std::vector<double>& x) { // L^T x' = x
    for (int r = d - 1; r >= 0; --r) {
      double s = x[r];
      for (int c = r + 1; c < d; ++c) s -= l.at(c, r) * x[c];
      x[r] = s / l.at(r, r);
    }
  };

  Matrix m(d, d); // L^-1 Sb L^-T, built column-by-column then symmetrized
  {
    Matrix tmp(d, d); // L^-1 Sb
    std::vector<double> col(d);
    for (int c = 0; c < d; ++c) {
      for (int r = 0; r < d; ++r) col[r] = sb.at(r, c);
      forward_solve(col);
      for (int r = 0; r < d; ++r) tmp.at(r, c) = col[r];
    }
    for (int r = 0; r < d; ++r) { // rows of tmp times L^-T == forward solve on rows
      for (int c = 0; c < d; ++c) col[c] = tmp.at(r, c);
      forward_solve(col);
      for (int c = 0; c < d; ++c) m.at(r, c) = col[c];
    }
    for (int r = 0; r < d; ++r)
      for (int c = r + 1; c < d; ++c) {
        const double avg = 0.5 * (m.at(r, c) + m.at(c, r));
        m.at(r, c) = avg;
        m.at(c, r) = avg;
      }
  }

  std::vector<double> evals;
  Matrix evecs;
  jacobi_eigen(m, evals, evecs);
  p.eigenvalues.assign(evals.begin(),
                       evals.begin() + std::min(d, c_count - 1));

  std::vector<double> w1(d);
  for (int r = 0; r < d; ++r) w1[r] = evecs.at(r, 0);
  backward_solve(w1);
  normalize(w1);

  std::vector<double> w2(d, 0.0);
  if (c_count > 2) {
    for (int r = 0; r < d; ++r) w2[r] = evecs.at(r, 1);
    backward_solve(w2);
    // Gram-Schmidt against w1 keeps the pair usable as a 2D chart
    const double c01 = dot(w2, w1);
    for (int r = 0; r < d; ++r) w2[r] -= c01 * w1[r];
    normalize(w2);
  } else {
    // leading PC of the residual orthogonal to w1
    std::vector<std::vector<double>> resid(latents.size(), std::vector<double>(d));
    for (std::size_t i = 0; i < latents.size(); ++i) {
      double proj = 0.0;
      for (int k = 0; k < d; ++k) proj += (latents[i][k] - p.grand_mean[k]) * w1[k];
      for (int k = 0; k < d; ++k)
        resid[i][k] = latents[i][k] - p.grand_mean[k] - proj * w1[k];
    }
    Matrix cov(d, d);
    for (const auto& r : resid)
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) cov.at(a, b) += r[a] * r[b];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < a; ++b) cov.at(a, b) = cov.at(b, a);
    std::vector<double> cev;
    Matrix cevec;
    jacobi_eigen(cov, cev, cevec);
    for (int r = 0; r < d; ++r) w2[r] = cevec.at(r, 0);
    normalize(w2);
  }

  // sign conventions
  double m0 = 0.0;
  for (int k = 0; k < d; ++k) m0 += (p.class_means.at(0, k) - p.grand_mean[k]) * w1[k];
  if (m0 > 0.0)
    for (double& x : w1) x = -x;
  int arg = 0;
  for (int k = 1; k < d; ++k)
    if (std::abs(w2[k]) > std::abs(w2[arg])) arg = k;
  if (w2[arg] < 0.0)
    for (double& x : w2) x = -x;

  p.basis[0] = std::move(w1);
  p.basis[1] = std::move(w2);
  return p;
}

double fisher_balanced_accuracy_2d(const std::vector<std::array<double, 2>>& a,
                                   const std::vector<std::array<double, 2>>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("fisher_balanced_accuracy_2d: need >= 2 points per set");

  auto mean_of = [](const std::vector<std::array<double, 2>>& pts) {
    std::array<double, 2> m{0.0, 0.0};
    for (const auto& p : pts) {
      m[0] += p[0];
      m[1] += p[1];
    }
    m[0] /= static_cast<double>(pts.size());
    m[1] /= static_cast<double>(pts.size());
    return m;
  };
  const auto ma = mean_of(a), mb = mean_of(b);

  double s00 = 0.0, s01 = 0.0, s11 = 0.0;
  auto accumulate = [&](const std::vector<std::array<double, 2>>& pts,
                        const std::array<double, 2>& m) {
    for (const auto& p : pts) {
      const double d0 = p[0] - m[0], d1 = p[1] - m[1];
      s00 += d0 * d0;
      s01 += d0 * d1;
      s11 += d1 * d1;
    }
  };
  accumulate(a, ma);
  accumulate(b, mb);
  const double tr = s00 + s11;
  s00 += 1e-9 * tr + 1e-12;
  s11 += 1e-9 * tr + 1e-12;

  // w = Sw^-1 (ma - mb) in closed form
  const double det = s00 * s11 - s01 * s01;
  const double dm0 = ma[0] - mb[0], dm1 = ma[1] - mb[1];
  const double w0 = (s11 * dm0 - s01 * dm1) / det;
  const double w1 = (-s01 * dm0 + s00 * dm1) / det;

  std::vector<std::pair<double, bool>> scored; // (projection, is_a)
  for (const auto& p : a) scored.push_back({w0 * p[0] + w1 * p[1], true});
  for (const auto& p : b) scored.push_back({w0 * p[0] + w1 * p[1], false});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });

  // sweep thresholds between adjacent scores; class a projects high
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double best = 0.5;
  double a_below = 0.0, b_below = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].second)
      a_below += 1.0;
    else
      b_below += 1.0;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    const double bacc = 0.5 * ((na - a_below) / na + b_below / nb);
    best = std::max(best, std::max(bacc, 1.0 - bacc));
  }
  return best;
}

namespace {

double cross(const std::array<double, 2>& o, const std::array<double, 2>& a,
             const std::array<double, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew monotone chain, counter-clockwise, no duplicate endpoint
std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<std::array<double, 2>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_hull(const std::vector<std::array<double, 2>>& hull,
                   const std::array<double, 2>& p) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return hull[0] == p;
  if (hull.size() == 2) { // on the segment, with a small tolerance
    const double c = cross(hull[0], hull[1], p);
    const double d0 = hull[1][0] - hull[0][0], d1 = hull[1][1] - hull[0][1];
    const double len2 = d0 * d0 + d1 * d1;
    if (c * c > 1e-18 * len2) return false;
    const double t = ((p[0] - hull[0][0]) * d0 + (p[1] - hull[0][1]) * d1) / len2;
    return t >= -1e-9 && t <= 1.0 + 1e-9;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -1e-12) return false; // CCW hull: inside is left of edges
  }
  return true;
}

} // namespace

double convex_hull_containment(const std::vector<std::array<double, 2>>& ref,
                               const std::vector<std::array<double, 2>>& query) {
  if (ref.empty() || query.empty())
    throw std::invalid_argument("convex_hull_containment: empty input");
  const auto hull = convex_hull(ref);
  std::size_t inside = 0;
  for (const auto& p : query)
    if (point_in_hull(hull, p)) ++inside;
  return static_cast<double>(inside) / static_cast<double>(query.size());
}

} // namespace shapeprior
