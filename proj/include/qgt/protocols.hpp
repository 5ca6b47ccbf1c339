#pragma once

// The measurement protocols as executable procedures: Rabi spectroscopy,
// commensuration-pulse eigenstate preparation, Hadamard-assisted band-mixing
// tomography, two-tone metric/curvature extraction, and Landau-Zener fits.

#include <random>

#include "qgt/dynamics.hpp"

namespace qgt {

enum class MeasureMode { branch, sample };

struct RabiSpectrum {
    std::vector<SpectralPeak> peaks;   // amplitude-descending
    std::vector<double> inferred_q;    // q = (Omega/A)^2, frequency-descending
    DrivePulse drive;
    std::string basis_tag;
};

struct PreparationPlan {
    double duration = 0.0;              // T
    std::vector<long> even_n;           // integer cycle counts for the even set
    std::vector<long> odd_m;            // half-cycle integers for the odd set
    std::vector<int> partition;         // per pair: 0 = even set, 1 = odd set
    RealVector omegas;                  // Rabi frequencies the plan is built on
    double predicted_fidelity = 0.0;    // overlap with the ideally-evolved target
    double branch_probability = 0.0;    // product of per-pair success probabilities
};

struct MeasurementRecord {
    int outcome = 0;      // -1 (E_-) or +1 (E_+)
    double p_minus = 0.0;
    double p_plus = 0.0;
    Vector post_state;    // normalized, pair coordinates
    std::string rng_tag;  // "deterministic-branch" or the seed used
};

struct PreparationOutcome {
    std::vector<MeasurementRecord> records;  // branch mode returns both branches
    double fidelity = 0.0;                   // pre-measurement vs ideal target
    Vector final_state;                      // pre-measurement, pair coordinates
};

struct MixingTransform {
    int band = -1;
    Matrix entries;           // N x N a_{nu mu}, row gauge: phase of a_{nu 1} = 0
    Matrix ground_truth;      // <psi_bar_mu | psi_tilde_nu> from the simulator
    PreparationPlan plan;     // the two-tone commensuration pulse used
};

struct ExtractionResult {
    Matrix metric_est;        // bar-basis estimates (band minus)
    Matrix curvature_est;
    Matrix metric_truth;
    Matrix curvature_truth;
    double metric_error = 0.0;     // relative Frobenius deviations
    double curvature_error = 0.0;
    RealVector q_single_j;    // intermediate spectroscopy results
    RealVector q_single_k;
};

struct LZExtraction {
    double q_fit = 0.0;
    double residual = 0.0;    // max relative deviation of the linear law
    double q_truth = 0.0;
    std::vector<double> alphas;
    std::vector<double> transfer;  // 1 - P_stay per alpha
};

// Pair basis of an RWA drive: SVD of the coupling block. Column nu of u (v)
// holds the lower (upper) band member of pair nu in band-frame coefficients;
// the coupling is diagonal, real and non-negative in this basis, so the
// resonant dynamics is an exact -i sin / cos rotation per pair.
struct PairBasis {
    Matrix u;         // N x N
    Matrix v;         // N x N
    RealVector rabi;  // s_nu = A sqrt(q_nu), descending
};
PairBasis pair_basis(const RWASystem& sys);

// --- Rabi spectroscopy -----------------------------------------------------

// psi0 empty -> equal superposition of the band-minus frame columns.
// The population frequency is halved inside, so inferred_q = (Omega/A)^2 with
// Omega the amplitude Rabi frequency.
RabiSpectrum rabi_spectroscopy(const HamiltonianModel& model, const ParameterPoint& lambda,
                               int band_sign, const DrivePulse& pulse,
                               const std::optional<Vector>& psi0, EvolveMode mode,
                               int record_len = 4096);

// --- Eigenstate preparation ------------------------------------------------

// Bounded integer commensuration search: T = n pi / Omega_base maximizing the
// ideal-target overlap fidelity. n_min/n_max restrict the grid (0 = free).
PreparationPlan plan_preparation(const RealVector& omegas, const std::vector<int>& partition,
                                 double t_max, double tol = 1e-9, long n_min = 1,
                                 long n_max = 0);

// Simulates the commensuration pulse on the decoupled pair system defined by
// `omegas` (state c0 in pair coordinates, lower block first) followed by a
// projective energy measurement.
PreparationOutcome prepare_run(const RealVector& omegas, const PreparationPlan& plan,
                               const Vector& c0, MeasureMode mode, unsigned long seed = 0);

// Model-driven preparation: evolves the RWA system of `pulse` for plan.T and
// measures. psi0_pairs holds lower-band pair amplitudes (size N).
PreparationOutcome prepare_eigenstate(const HamiltonianModel& model,
                                      const ParameterPoint& lambda, const DrivePulse& pulse,
                                      const Vector& psi0_pairs, const PreparationPlan& plan,
                                      MeasureMode mode, unsigned long seed = 0);

// Iterative bisection for N-fold degenerate bands (N <= 4): one partition per
// round applied to the surviving set, until a single pair remains.
struct IterationResult {
    std::vector<MeasurementRecord> chain;
    Eigen::Index final_pair = -1;  // original pair index
    double final_fidelity = 0.0;
};
IterationResult iterate_preparation(const RealVector& omegas,
                                    const std::vector<std::vector<int>>& round_partitions,
                                    const Vector& c0, double t_max, MeasureMode mode,
                                    unsigned long seed = 0);

// --- Tomography ------------------------------------------------------------

// Ideal in-subspace Hadamard acting on two designated frame columns.
Matrix hadamard_in_subspace(const Matrix& frame, Eigen::Index mu1, Eigen::Index mu2);
// Ideal in-subspace phase gate diag(1, i) on two frame columns (phase-sign
// disambiguation setting).
Matrix phase_gate_in_subspace(const Matrix& frame, Eigen::Index mu1, Eigen::Index mu2);

MixingTransform tomography_mixing(const HamiltonianModel& model, const ParameterPoint& lambda,
                                  const DrivePulse& single_pulse,
                                  const DrivePulse& two_tone_pulse, int band_sign,
                                  MeasureMode mode, double t_max, long shots = 10000,
                                  unsigned long seed = 0);

// --- Metric / curvature extraction -----------------------------------------

ExtractionResult extract_metric_curvature(const HamiltonianModel& model,
                                          const ParameterPoint& lambda, Eigen::Index j,
                                          Eigen::Index k, double amplitude,
                                          MeasureMode mode = MeasureMode::branch,
                                          double t_max = 0.0, long shots = 10000,
                                          unsigned long seed = 0);

// --- Landau-Zener extraction -----------------------------------------------

LZExtraction lz_extraction(const HamiltonianModel& model, const ParameterPoint& lambda,
                           const DrivePulse& pulse, const std::vector<double>& alphas,
                           Eigen::Index state_index, double window_factor = 30.0,
                           int jobs = 0);

} // namespace qgt
