#include "qgt/geometry.hpp"

#include <cmath>

namespace qgt {

namespace {

void check_indices(const HamiltonianModel& model, Eigen::Index j, Eigen::Index k) {
    if (j < 0 || j >= model.param_count || k < 0 || k >= model.param_count)
        throw IndexOutOfRange("parameter index out of range");
}

void check_band(int band_sign) {
    if (band_sign != -1 && band_sign != +1)
        throw InvalidSetting("band sign must be -1 or +1");
}

// Frames at shifted points aligned to the reference frame by the unitary
// polar factor of the overlap (parallel transport to O(h^2)).
Matrix aligned_frame(const Matrix& reference, const Matrix& shifted) {
    const Matrix overlap = shifted.adjoint() * reference;
    const Matrix u = polar_unitary(overlap);
    return shifted * u;
}

} // namespace

Matrix interband_coupling(const HamiltonianModel& model, const ParameterPoint& lambda,
                          const BandDecomposition& bands, Eigen::Index j) {
    const HermitianMatrix dh = model.gradient(lambda, j);
    return bands.frame_minus.adjoint() * dh.mat() * bands.frame_plus / bands.gap;
}

QGTensor qgt_resolvent(const HamiltonianModel& model, const ParameterPoint& lambda,
                       const BandDecomposition& bands, int band_sign,
                       Eigen::Index j, Eigen::Index k) {
    check_indices(model, j, k);
    check_band(band_sign);
    const Matrix cj = interband_coupling(model, lambda, bands, j);
    const Matrix ck = interband_coupling(model, lambda, bands, k);
    QGTensor q;
    q.band = band_sign;
    q.j = j;
    q.k = k;
    // Q_jk^- = C_j C_k^dag, Q_jk^+ = C_j^dag C_k (gap factor inside C).
    q.matrix = band_sign < 0 ? Matrix(cj * ck.adjoint()) : Matrix(cj.adjoint() * ck);
    return q;
}

QGTensor qgt_resolvent(const HamiltonianModel& model, const ParameterPoint& lambda,
                       int band_sign, Eigen::Index j, Eigen::Index k) {
    return qgt_resolvent(model, lambda, decompose_bands(model, lambda), band_sign, j, k);
}

QGTensor qgt_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                const BandDecomposition& bands, int band_sign,
                Eigen::Index j, Eigen::Index k, double h) {
    check_indices(model, j, k);
    if (h < 1e-6 || h > 1e-2) throw InvalidSetting("qgt_fd: step h out of [1e-6, 1e-2]");

    const Matrix& frame = bands.frame(band_sign);
    const Eigen::Index d = frame.rows();

    auto frame_derivative = [&](Eigen::Index idx) {
        ParameterPoint lp = lambda, lm = lambda;
        lp(idx) += h;
        lm(idx) -= h;
        const Matrix fp = aligned_frame(frame, decompose_bands(model, lp).frame(band_sign));
        const Matrix fm = aligned_frame(frame, decompose_bands(model, lm).frame(band_sign));
        return Matrix((fp - fm) / (2.0 * h));
    };

    const Matrix dfj = frame_derivative(j);
    const Matrix dfk = (k == j) ? dfj : frame_derivative(k);
    const Matrix complement = Matrix::Identity(d, d) - frame * frame.adjoint();

    QGTensor q;
    q.band = band_sign;
    q.j = j;
    q.k = k;
    q.matrix = dfj.adjoint() * complement * dfk;
    return q;
}

QGTensor qgt_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                int band_sign, Eigen::Index j, Eigen::Index k, double h) {
    return qgt_fd(model, lambda, decompose_bands(model, lambda), band_sign, j, k, h);
}

Matrix metric(const QGTensor& q) { return 0.5 * (q.matrix + q.matrix.adjoint()); }

Matrix curvature(const QGTensor& q) {
    return Complex(0.0, 1.0) * (q.matrix - q.matrix.adjoint());
}

QGTEigenbasis diagonalize_qgt(const Matrix& q_matrix, const Matrix& frame) {
    const double scale = std::max(q_matrix.cwiseAbs().maxCoeff(), 1e-300);
    if ((q_matrix - q_matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NotHermitian("diagonalize_qgt: matrix is not Hermitian");
    if (frame.cols() != q_matrix.rows())
        throw InvalidSetting("diagonalize_qgt: frame/matrix size mismatch");

    const EigenSystem sys = hermitian_eig(HermitianMatrix(q_matrix));
    const Eigen::Index n = q_matrix.rows();

    QGTEigenbasis basis;
    basis.eigenvalues = sys.values.reverse();
    Matrix vectors(n, n);
    for (Eigen::Index i = 0; i < n; ++i) vectors.col(i) = sys.vectors.col(n - 1 - i);
    // transform rows are eigenvector bras: (U~ Q U~^dag) diagonal.
    basis.transform = vectors.adjoint();
    basis.rotated_frame = frame * basis.transform.adjoint();
    return basis;
}

QGTEigenbasis diagonalize_qgt(const QGTensor& q, const Matrix& frame) {
    return diagonalize_qgt(q.matrix, frame);
}

CouplingOperator coupling_operator_single(const HamiltonianModel& model,
                                          const ParameterPoint& lambda,
                                          const BandDecomposition& bands, int band_sign,
                                          Eigen::Index j) {
    CouplingOperator op;
    op.band = band_sign;
    op.matrix = qgt_resolvent(model, lambda, bands, band_sign, j, j).matrix;
    op.description = "single-drive Q_jj, j=" + std::to_string(j);
    return op;
}

CouplingOperator coupling_operator(const HamiltonianModel& model, const ParameterPoint& lambda,
                                   const BandDecomposition& bands, int band_sign,
                                   Eigen::Index j, Eigen::Index k, double phi) {
    if (j == k) throw InvalidSetting("coupling_operator: two-tone drive needs j != k");
    const Matrix qjj = qgt_resolvent(model, lambda, bands, band_sign, j, j).matrix;
    const Matrix qkk = qgt_resolvent(model, lambda, bands, band_sign, k, k).matrix;
    const Matrix qjk = qgt_resolvent(model, lambda, bands, band_sign, j, k).matrix;
    const Matrix qkj = qgt_resolvent(model, lambda, bands, band_sign, k, j).matrix;
    const Complex phase = std::exp(Complex(0.0, band_sign * phi));
    CouplingOperator op;
    op.band = band_sign;
    op.matrix = qjj + qkk + phase * qjk + std::conj(phase) * qkj;
    op.description = "two-tone (j=" + std::to_string(j) + ", k=" + std::to_string(k) +
                     ", phi=" + std::to_string(phi) + ")";
    return op;
}

ConsistencyReport factorized_consistency(const HamiltonianModel& model,
                                         const ParameterPoint& lambda, Eigen::Index j) {
    const BandDecomposition bands = decompose_bands(model, lambda);
    const Matrix c = interband_coupling(model, lambda, bands, j);
    const Matrix q_minus = qgt_resolvent(model, lambda, bands, -1, j, j).matrix;
    const Matrix q_plus = qgt_resolvent(model, lambda, bands, +1, j, j).matrix;

    ConsistencyReport report;
    const double dev_minus = (q_minus - c * c.adjoint()).cwiseAbs().maxCoeff();
    const double dev_plus = (q_plus - c.adjoint() * c).cwiseAbs().maxCoeff();

    const Eigen::Index n = bands.degeneracy();
    const Matrix frame = Matrix::Identity(bands.frame_minus.rows(), n);
    report.eigenvalues_minus = diagonalize_qgt(q_minus, frame).eigenvalues;
    report.eigenvalues_plus = diagonalize_qgt(q_plus, frame).eigenvalues;
    const double dev_eigen =
        (report.eigenvalues_minus - report.eigenvalues_plus).cwiseAbs().maxCoeff();

    report.max_deviation = std::max({dev_minus, dev_plus, dev_eigen});
    const double scale = std::max(1.0, q_minus.cwiseAbs().maxCoeff());
    report.pass = report.max_deviation <= 1e-10 * scale;
    return report;
}

} // namespace qgt
