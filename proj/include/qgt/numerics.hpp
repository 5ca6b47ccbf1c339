#pragma once

// Numerical kernel shared by all modules: Hermitian eigendecomposition with
// deterministic degenerate-subspace handling, exact midpoint-exponential
// propagation, and spectral peak extraction from population traces.

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qgt/errors.hpp"

namespace qgt {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// Hermitian matrix value type. Construction verifies Hermiticity to
// 1e-12 * max|H| and symmetrizes the remaining rounding asymmetry.
class HermitianMatrix {
  public:
    explicit HermitianMatrix(Matrix m);

    Eigen::Index dim() const { return mat_.rows(); }
    const Matrix& mat() const { return mat_; }

  private:
    Matrix mat_;
};

struct EigenSystem {
    RealVector values;  // ascending
    Matrix vectors;     // column-orthonormal, columns match values
};

struct SpectralPeak {
    double frequency = 0.0;   // angular, >= 0
    double amplitude = 0.0;   // oscillation amplitude estimate, >= 0
    double resolution = 0.0;  // frequency bin width 2*pi/(n*dt)
};

// Eigendecomposition with ascending eigenvalues. Columns inside a numerically
// degenerate cluster are re-orthonormalized deterministically (pivoted
// projection of canonical basis vectors), or aligned to `previous_frame`
// when one is supplied. Every column phase is fixed afterwards.
EigenSystem hermitian_eig(const HermitianMatrix& h,
                          const std::optional<Matrix>& previous_frame = std::nullopt);

// exp(-i H_mid dt) psi through the eigendecomposition of H_mid.
Vector propagate_step(const HermitianMatrix& h_mid, const Vector& psi, double dt);

// Peaks of the windowed Fourier magnitude of the mean-subtracted trace,
// refined by quadratic interpolation of the log magnitude around each local
// maximum. Sorted by amplitude descending, at most max_peaks entries.
std::vector<SpectralPeak> dominant_frequencies(const std::vector<double>& trace,
                                               double dt, int max_peaks);

// Hann-windowed amplitude spectrum of the mean-subtracted trace (bin i holds
// angular frequency 2*pi*i/(n*dt)); used for peak-visibility diagnostics.
std::vector<double> spectrum_magnitudes(const std::vector<double>& trace);

// Helpers shared with geometry/dynamics.

// Deterministic orthonormal frame of the span of `cols`: canonical basis
// vectors are projected onto the span and picked greedily by residual norm.
Matrix pivoted_orthonormal_frame(const Matrix& cols);

// Fix each column's global phase: largest-magnitude entry made real positive.
void fix_column_phases(Matrix& m);

// Unitary polar factor U of A = U P (P Hermitian positive semidefinite).
// Throws AlignmentSingular when A is close to singular (min singular value
// below `min_singular`).
Matrix polar_unitary(const Matrix& a, double min_singular = 0.1);

} // namespace qgt
