#pragma once

// Lab-frame and RWA Hamiltonians for one- and two-tone drives, time-dependent
// Schroedinger integration, the resonant closed form, and Landau-Zener sweeps.

#include "qgt/geometry.hpp"

namespace qgt {

struct DrivePulse {
    Eigen::Index j = 0;                       // modulated parameter
    std::optional<Eigen::Index> k;            // second tone (two-parameter drive)
    double amplitude = 0.0;                   // A, energy units
    double omega = 0.0;                       // angular drive frequency
    double phase = 0.0;                       // phi between the two tones
    double duration = 0.0;                    // T
    double ratio_max = 0.05;                  // A/omega guard

    bool two_tone() const { return k.has_value(); }
    // Throws PulseRejected / InvalidSetting unless `force`.
    void validate(bool force = false) const;
    double detuning(double gap) const { return gap - omega; }
};

enum class EvolveMode { full, full_exact_modulation, rwa };

struct PopulationTrace {
    std::vector<double> times;
    std::vector<double> pop_minus;
    std::vector<double> pop_plus;
    std::vector<std::vector<double>> state_pop;  // per reference-frame column
    std::vector<double> norm;
};

// RWA Hamiltonian in the 2N-dimensional band basis (minus block first) and
// the frames that define it. coupling = A (C_j + e^{i phi} C_k).
struct RWASystem {
    HermitianMatrix hamiltonian;
    BandDecomposition bands;
    Matrix coupling;  // N x N upper-off-diagonal block source
    double detuning = 0.0;
};

struct LZSweep {
    double alpha = 0.0;           // sweep rate
    double t_start = 0.0;         // < 0
    double t_end = 0.0;           // > 0
    DrivePulse pulse;             // resonant at t = 0
    Eigen::Index state_index = 0; // QGT eigenpair label in the lower band
    std::optional<Vector> initial_state;  // explicit 2N vector overrides
    double window_factor = 20.0;  // required |alpha t_edge| / |V|
};

struct LZResult {
    PopulationTrace trace;
    double p_stay = 0.0;
};

struct RWAValidityPoint {
    ParameterPoint lambda;
    double gap = 0.0;
    double discrepancy = 0.0;      // max |P_full - P_rwa|
    double peak_visibility = 0.0;  // strongest sub-omega/2 peak over spectral floor
    bool flagged = false;
};

// First-order expanded drive Hamiltonian at time t; `exact_modulation`
// evaluates H0 at the shifted lambda(t) instead of the linearization.
HermitianMatrix lab_hamiltonian(const HamiltonianModel& model, const ParameterPoint& lambda,
                                const DrivePulse& pulse, double t,
                                bool exact_modulation = false);

RWASystem rwa_hamiltonian(const HamiltonianModel& model, const ParameterPoint& lambda,
                          const DrivePulse& pulse);

// psi0 is D-dimensional in full modes and 2N-dimensional (band basis,
// minus block first) in rwa mode. reference_frame columns live in the same
// space as psi0 and define state_pop.
PopulationTrace evolve(const HamiltonianModel& model, const ParameterPoint& lambda,
                       const DrivePulse& pulse, const Vector& psi0, double dt,
                       EvolveMode mode,
                       const std::optional<Matrix>& reference_frame = std::nullopt,
                       int sample_stride = 4);

// Resonant closed form: per eigenpair two-level rotation with
// Omega_nu = A sqrt(q_nu). c0 is 2N in the coupling eigenbasis.
// Throws DetunedNotClosedForm for detuned drives (numeric fallback).
Vector rwa_closed_form(const CouplingOperator& coupling, double detuning, double amplitude,
                       double t, const Vector& c0);
// Same rotation for a known frequency list.
Vector pair_rotation(const RealVector& omegas, double t, const Vector& c0);

LZResult lz_run(const HamiltonianModel& model, const ParameterPoint& lambda,
                const LZSweep& sweep, double dt);

// Finite-window P_stay with Richardson extrapolation over two window sizes.
double lz_p_stay_extrapolated(const HamiltonianModel& model, const ParameterPoint& lambda,
                              const DrivePulse& pulse, double alpha,
                              Eigen::Index state_index, double window_factor = 30.0);

// exp(-pi A^2 q / alpha)
double lz_probability(double q, double amplitude, double alpha);

std::vector<RWAValidityPoint> rwa_validity(const HamiltonianModel& model,
                                           const std::vector<ParameterPoint>& path,
                                           const DrivePulse& pulse);

// Strongest local spectral maximum below freq_max relative to the median
// magnitude in that range (1.0 when nothing sticks out).
double spectral_visibility(const std::vector<double>& trace, double dt, double freq_max);

} // namespace qgt
