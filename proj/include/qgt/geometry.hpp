#pragma once

// Non-Abelian quantum geometric tensor: gauge-covariant resolvent computation,
// independent finite-difference oracle, metric/curvature views, QGT eigenbases
// and the drive-coupling combinations entering the two-tone dynamics.

#include <string>

#include "qgt/models.hpp"

namespace qgt {

struct QGTensor {
    int band = -1;           // band sign: -1 or +1
    Eigen::Index j = 0;      // parameter indices
    Eigen::Index k = 0;
    Matrix matrix;           // N x N, [Q_jk]_{nu mu}
};

struct QGTEigenbasis {
    RealVector eigenvalues;  // descending, >= 0 for Q_jj
    Matrix transform;        // N x N unitary U~: rows map frame columns to eigenvectors
    Matrix rotated_frame;    // D x N, columns |psi~_nu>
};

struct CouplingOperator {
    int band = -1;
    Matrix matrix;           // N x N
    std::string description;
};

struct ConsistencyReport {
    double max_deviation = 0.0;  // worst of the factorized identities
    bool pass = false;
    RealVector eigenvalues_minus;
    RealVector eigenvalues_plus;
};

// Resolvent form of the QGT over a supplied decomposition:
// [Q_jk^s]_{nm} = sum_p <psi_n^s|dH_j|psi_p^-s><psi_p^-s|dH_k|psi_m^s> / gap^2.
QGTensor qgt_resolvent(const HamiltonianModel& model, const ParameterPoint& lambda,
                       const BandDecomposition& bands, int band_sign,
                       Eigen::Index j, Eigen::Index k);
QGTensor qgt_resolvent(const HamiltonianModel& model, const ParameterPoint& lambda,
                       int band_sign, Eigen::Index j, Eigen::Index k);

// Finite-difference oracle: parallel-transport aligned frame derivatives in
// the literal projector form. Agrees with qgt_resolvent to O(h^2).
QGTensor qgt_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                int band_sign, Eigen::Index j, Eigen::Index k, double h = 1e-4);
QGTensor qgt_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                const BandDecomposition& bands, int band_sign,
                Eigen::Index j, Eigen::Index k, double h = 1e-4);

Matrix metric(const QGTensor& q);     // (Q + Q^dag)/2
Matrix curvature(const QGTensor& q);  // i (Q - Q^dag)

// Diagonalize a Hermitian QGT (or coupling) matrix; eigenvalues descending,
// deterministic eigenvector conventions, rotated_frame = frame * transform^dag.
QGTEigenbasis diagonalize_qgt(const Matrix& q_matrix, const Matrix& frame);
QGTEigenbasis diagonalize_qgt(const QGTensor& q, const Matrix& frame);

// Q_jj (single drive) or Q_jj + Q_kk + e^{i s phi} Q_jk + e^{-i s phi} Q_kj
// (two-tone, band sign s enters the phase).
CouplingOperator coupling_operator(const HamiltonianModel& model, const ParameterPoint& lambda,
                                   const BandDecomposition& bands, int band_sign,
                                   Eigen::Index j, Eigen::Index k, double phi);
CouplingOperator coupling_operator_single(const HamiltonianModel& model,
                                          const ParameterPoint& lambda,
                                          const BandDecomposition& bands, int band_sign,
                                          Eigen::Index j);

// Checks Q_jj^- = C C^dag / gap^2 and Q_jj^+ = C^dag C / gap^2 with
// C = F_-^dag dH_j F_+, hence both bands share nonzero eigenvalues.
ConsistencyReport factorized_consistency(const HamiltonianModel& model,
                                         const ParameterPoint& lambda, Eigen::Index j);

// Interband matrix C_{nm} = <psi_n^-|dH_j|psi_m^+> / gap; building block of
// both the QGT and the RWA drive coupling.
Matrix interband_coupling(const HamiltonianModel& model, const ParameterPoint& lambda,
                          const BandDecomposition& bands, Eigen::Index j);

} // namespace qgt
