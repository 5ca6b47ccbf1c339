#pragma once

// Parametric Hamiltonians H0(lambda) with exact two-band degenerate structure,
// analytic parameter gradients, and the band decomposition they induce.

#include <array>
#include <functional>
#include <map>
#include <string>
#include <variant>

#include "qgt/numerics.hpp"

namespace qgt {

using ParameterPoint = Eigen::VectorXd;

struct HamiltonianModel {
    std::string name;
    Eigen::Index dim = 0;         // D
    Eigen::Index param_count = 0; // M
    Eigen::Index degeneracy = 0;  // N, with D = 2N for builtin two-band models
    std::function<HermitianMatrix(const ParameterPoint&)> evaluate;
    // Analytic gradient when available; empty -> central finite difference.
    std::function<HermitianMatrix(const ParameterPoint&, Eigen::Index)> analytic_gradient;

    HermitianMatrix gradient(const ParameterPoint& lambda, Eigen::Index j,
                             double h = 1e-5) const;
};

struct BandDecomposition {
    double energy_minus = 0.0;
    double energy_plus = 0.0;
    Matrix frame_minus;  // D x N, column-orthonormal
    Matrix frame_plus;   // D x N
    double gap = 0.0;
    double grouping_tol = 0.0;

    Eigen::Index degeneracy() const { return frame_minus.cols(); }
    const Matrix& frame(int band_sign) const { return band_sign < 0 ? frame_minus : frame_plus; }
    double energy(int band_sign) const { return band_sign < 0 ? energy_minus : energy_plus; }
};

using ModelSettings = std::map<std::string, std::variant<double, long, Eigen::MatrixXd>>;

// Builtin gallery: spin_half, dirac4, dirac4_generic, weyl4.
HamiltonianModel builtin_model(const std::string& name, const ModelSettings& settings = {});

// Clusters eigenvalues into exactly two degenerate groups of equal size.
// grouping_tol <= 0 selects the default 1e-8 * max|H|.
BandDecomposition decompose_bands(const HamiltonianModel& model, const ParameterPoint& lambda,
                                  double grouping_tol = 0.0);

// Central finite difference (H(l+h e_j) - H(l-h e_j)) / 2h, symmetrized.
HermitianMatrix gradient_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                            Eigen::Index j, double h = 1e-5);

// The five mutually anticommuting 4x4 Gamma matrices used by the dirac4
// family: sx(x)sx, sx(x)sy, sx(x)sz, sy(x)1, sz(x)1.
const std::array<Matrix, 5>& dirac_gammas();

// Coefficients of dirac4_generic for a given seed, frozen mapping.
void dirac4_generic_coefficients(unsigned long seed, Eigen::MatrixXd& c, Eigen::MatrixXd& e);

} // namespace qgt
