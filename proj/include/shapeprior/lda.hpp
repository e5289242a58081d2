#pragma once

#include <array>
#include <string>
#include <vector>

#include "shapeprior/matrix.hpp"

namespace shapeprior {

// Fisher discriminant basis over latent codes. Solves
// S_b w = mu (S_w + gamma I) w with gamma = 1e-6 * trace(S_w)/d, via Cholesky
// whitening and a symmetric Jacobi eigensolver. With two classes only one
// discriminant direction exists; the second axis is then the leading
// principal component of the data residual orthogonal to the first.
// Projected coordinates are dot products taken after subtracting the grand
// mean (the origin maps to minus the projected grand mean).
// Sign conventions: the lexicographically first class's centroid projects
// negative on axis 1; axis 2 has its largest-magnitude entry positive.
struct LdaProjection {
  int d = 0;
  std::vector<std::string> class_names; // sorted
  Matrix class_means;                   // C x d
  std::vector<double> grand_mean;       // length d
  std::array<std::vector<double>, 2> basis; // unit vectors, length d
  std::vector<double> eigenvalues;      // discriminant eigenvalues, descending

  std::array<double, 2> project(const std::vector<double>& z) const;
};

LdaProjection lda_fit(const std::vector<std::vector<double>>& latents,
                      const std::vector<std::string>& labels);

// --- small dense helpers shared with tests ---

// symmetric eigendecomposition, eigenvalues descending; a is d x d symmetric
void jacobi_eigen(const Matrix& a, std::vector<double>& eigenvalues,
                  Matrix& eigenvectors);

// in-place lower Cholesky of an SPD matrix; throws if not positive definite
Matrix cholesky_lower(const Matrix& a);

// --- 2D separation diagnostics over projected points ---

// best balanced accuracy of a 1D threshold along the Fisher direction
// between the two point sets (separability measure, evaluated in-sample)
double fisher_balanced_accuracy_2d(const std::vector<std::array<double, 2>>& a,
                                   const std::vector<std::array<double, 2>>& b);

// fraction of query points inside (or on) the convex hull of ref points
double convex_hull_containment(const std::vector<std::array<double, 2>>& ref,
                               const std::vector<std::array<double, 2>>& query);

} // namespace shapeprior
