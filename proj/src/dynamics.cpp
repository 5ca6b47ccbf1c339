#include "qgt/dynamics.hpp"

#include <cmath>

namespace qgt {

namespace {

constexpr Complex kI{0.0, 1.0};

void record_sample(PopulationTrace& trace, double t, const Vector& psi,
                   const BandDecomposition* bands, bool band_basis,
                   const std::optional<Matrix>& reference_frame) {
    trace.times.push_back(t);
    double p_minus = 0.0, p_plus = 0.0;
    if (band_basis) {
        const Eigen::Index n = psi.size() / 2;
        p_minus = psi.head(n).squaredNorm();
        p_plus = psi.tail(n).squaredNorm();
    } else {
        p_minus = (bands->frame_minus.adjoint() * psi).squaredNorm();
        p_plus = (bands->frame_plus.adjoint() * psi).squaredNorm();
    }
    trace.pop_minus.push_back(p_minus);
    trace.pop_plus.push_back(p_plus);
    trace.norm.push_back(psi.norm());
    if (reference_frame) {
        std::vector<double>& pops = trace.state_pop.emplace_back();
        pops.reserve(static_cast<size_t>(reference_frame->cols()));
        for (Eigen::Index c = 0; c < reference_frame->cols(); ++c)
            pops.push_back(std::norm(reference_frame->col(c).dot(psi)));
    }
}

} // namespace

void DrivePulse::validate(bool force) const {
    if (omega <= 0.0) throw InvalidSetting("DrivePulse: omega must be positive");
    if (duration <= 0.0) throw InvalidSetting("DrivePulse: duration must be positive");
    if (amplitude < 0.0) throw InvalidSetting("DrivePulse: amplitude must be non-negative");
    if (k && *k == j) throw InvalidSetting("DrivePulse: two-tone drive needs distinct indices");
    if (!force && amplitude / omega > ratio_max)
        throw PulseRejected("DrivePulse: A/omega exceeds ratio_max (use force to override)");
}

HermitianMatrix lab_hamiltonian(const HamiltonianModel& model, const ParameterPoint& lambda,
                                const DrivePulse& pulse, double t, bool exact_modulation) {
    const double scale = 2.0 * pulse.amplitude / pulse.omega;
    if (exact_modulation) {
        ParameterPoint shifted = lambda;
        shifted(pulse.j) += scale * std::cos(pulse.omega * t);
        if (pulse.k) shifted(*pulse.k) += scale * std::cos(pulse.omega * t + pulse.phase);
        return model.evaluate(shifted);
    }
    Matrix h = model.evaluate(lambda).mat() +
               scale * std::cos(pulse.omega * t) * model.gradient(lambda, pulse.j).mat();
    if (pulse.k)
        h += scale * std::cos(pulse.omega * t + pulse.phase) *
             model.gradient(lambda, *pulse.k).mat();
    return HermitianMatrix(h);
}

RWASystem rwa_hamiltonian(const HamiltonianModel& model, const ParameterPoint& lambda,
                          const DrivePulse& pulse) {
    BandDecomposition bands = decompose_bands(model, lambda);
    const Eigen::Index n = bands.degeneracy();

    Matrix coupling = pulse.amplitude * interband_coupling(model, lambda, bands, pulse.j);
    if (pulse.k)
        coupling += pulse.amplitude * std::exp(kI * pulse.phase) *
                    interband_coupling(model, lambda, bands, *pulse.k);

    Matrix h = Matrix::Zero(2 * n, 2 * n);
    h.topLeftCorner(n, n) =
        (bands.energy_minus + pulse.omega / 2.0) * Matrix::Identity(n, n);
    h.bottomRightCorner(n, n) =
        (bands.energy_plus - pulse.omega / 2.0) * Matrix::Identity(n, n);
    h.topRightCorner(n, n) = coupling;
    h.bottomLeftCorner(n, n) = coupling.adjoint();

    const double detuning = pulse.detuning(bands.gap);
    return RWASystem{HermitianMatrix(h), std::move(bands), std::move(coupling), detuning};
}

PopulationTrace evolve(const HamiltonianModel& model, const ParameterPoint& lambda,
                       const DrivePulse& pulse, const Vector& psi0, double dt,
                       EvolveMode mode, const std::optional<Matrix>& reference_frame,
                       int sample_stride) {
    pulse.validate(true);  // amplitude guard applied where pulses are built
    if (dt <= 0.0) throw InvalidSetting("evolve: dt must be positive");
    if (dt > (2.0 * M_PI / pulse.omega) / 16.0)
        throw StepTooLarge("evolve: dt exceeds (2 pi / omega) / 16");
    if (sample_stride < 1) throw InvalidSetting("evolve: sample_stride must be >= 1");

    const long steps = std::max(1L, std::lround(pulse.duration / dt));
    const double dt_eff = pulse.duration / static_cast<double>(steps);

    PopulationTrace trace;
    const bool band_basis = mode == EvolveMode::rwa;

    if (band_basis) {
        const RWASystem sys = rwa_hamiltonian(model, lambda, pulse);
        if (psi0.size() != sys.hamiltonian.dim())
            throw InvalidSetting("evolve: rwa state must be 2N-dimensional");
        // Constant generator: precompute the exact step unitary once.
        const EigenSystem eig = hermitian_eig(sys.hamiltonian);
        Vector phases(eig.values.size());
        for (Eigen::Index i = 0; i < eig.values.size(); ++i)
            phases(i) = std::exp(-kI * eig.values(i) * dt_eff);
        const Matrix step_u = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();

        Vector psi = psi0;
        record_sample(trace, 0.0, psi, nullptr, true, reference_frame);
        for (long s = 1; s <= steps; ++s) {
            psi = step_u * psi;
            if (s % sample_stride == 0 || s == steps)
                record_sample(trace, s * dt_eff, psi, nullptr, true, reference_frame);
        }
        return trace;
    }

    const BandDecomposition bands = decompose_bands(model, lambda);
    if (psi0.size() != model.dim)
        throw InvalidSetting("evolve: full-mode state must be D-dimensional");
    const bool exact = mode == EvolveMode::full_exact_modulation;

    Vector psi = psi0;
    record_sample(trace, 0.0, psi, &bands, false, reference_frame);
    for (long s = 1; s <= steps; ++s) {
        const double t_mid = (static_cast<double>(s) - 0.5) * dt_eff;
        psi = propagate_step(lab_hamiltonian(model, lambda, pulse, t_mid, exact), psi, dt_eff);
        if (s % sample_stride == 0 || s == steps)
            record_sample(trace, s * dt_eff, psi, &bands, false, reference_frame);
    }
    return trace;
}

Vector pair_rotation(const RealVector& omegas, double t, const Vector& c0) {
    const Eigen::Index n = omegas.size();
    if (c0.size() != 2 * n) throw InvalidSetting("pair_rotation: state must be 2N-dimensional");
    Vector out(2 * n);
    for (Eigen::Index nu = 0; nu < n; ++nu) {
        const double ct = std::cos(omegas(nu) * t);
        const double st = std::sin(omegas(nu) * t);
        out(nu) = ct * c0(nu) - kI * st * c0(n + nu);
        out(n + nu) = -kI * st * c0(nu) + ct * c0(n + nu);
    }
    return out;
}

Vector rwa_closed_form(const CouplingOperator& coupling, double detuning, double amplitude,
                       double t, const Vector& c0) {
    if (detuning != 0.0)
        throw DetunedNotClosedForm("rwa_closed_form: detuned drive, use numeric evolution");
    const Eigen::Index n = coupling.matrix.rows();
    const QGTEigenbasis basis =
        diagonalize_qgt(coupling.matrix, Matrix::Identity(n, n));
    RealVector omegas(n);
    for (Eigen::Index nu = 0; nu < n; ++nu)
        omegas(nu) = amplitude * std::sqrt(std::max(0.0, basis.eigenvalues(nu)));
    return pair_rotation(omegas, t, c0);
}

double lz_probability(double q, double amplitude, double alpha) {
    if (q < 0.0 || alpha <= 0.0) throw InvalidSetting("lz_probability: need q >= 0, alpha > 0");
    return std::exp(-M_PI * amplitude * amplitude * q / alpha);
}

LZResult lz_run(const HamiltonianModel& model, const ParameterPoint& lambda,
                const LZSweep& sweep, double dt) {
    if (!(sweep.t_start < 0.0 && sweep.t_end > 0.0))
        throw InvalidSetting("lz_run: window must straddle t = 0");
    if (dt <= 0.0) throw InvalidSetting("lz_run: dt must be positive");

    const RWASystem sys = rwa_hamiltonian(model, lambda, sweep.pulse);
    const Eigen::Index n = sys.bands.degeneracy();

    const CouplingOperator op =
        sweep.pulse.two_tone()
            ? coupling_operator(model, lambda, sys.bands, -1, sweep.pulse.j, *sweep.pulse.k,
                                sweep.pulse.phase)
            : coupling_operator_single(model, lambda, sys.bands, -1, sweep.pulse.j);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, sys.bands.frame_minus);

    Vector diabatic;
    double v_pair = 0.0;
    if (sweep.initial_state) {
        diabatic = *sweep.initial_state;
        if (diabatic.size() != 2 * n)
            throw InvalidSetting("lz_run: state must be 2N-dimensional");
        v_pair = sweep.pulse.amplitude * std::sqrt(std::max(0.0, basis.eigenvalues(0)));
    } else {
        if (sweep.state_index < 0 || sweep.state_index >= n)
            throw IndexOutOfRange("lz_run: state index out of range");
        diabatic = Vector::Zero(2 * n);
        // |psi~_nu^-> in band-frame coefficients is column nu of U~^dag.
        diabatic.head(n) = basis.transform.adjoint().col(sweep.state_index);
        v_pair = sweep.pulse.amplitude *
                 std::sqrt(std::max(0.0, basis.eigenvalues(sweep.state_index)));
    }

    const double edge = std::min(std::abs(sweep.alpha * sweep.t_start),
                                 std::abs(sweep.alpha * sweep.t_end));
    if (edge < sweep.window_factor * v_pair)
        throw AsymptoticViolation("lz_run: |alpha t_edge| below window_factor * |V|");

    const long steps = std::max(1L, std::lround((sweep.t_end - sweep.t_start) / dt));
    const double dt_eff = (sweep.t_end - sweep.t_start) / static_cast<double>(steps);
    const long stride = std::max(1L, steps / 2048);

    Matrix h_static = Matrix::Zero(2 * n, 2 * n);
    h_static.topRightCorner(n, n) = sys.coupling;
    h_static.bottomLeftCorner(n, n) = sys.coupling.adjoint();

    auto h_at = [&](double t) {
        Matrix h = h_static;
        // Zeeman-like sweep: minus band raised, plus band lowered.
        h.topLeftCorner(n, n) += sweep.alpha * t * Matrix::Identity(n, n);
        h.bottomRightCorner(n, n) -= sweep.alpha * t * Matrix::Identity(n, n);
        return HermitianMatrix(h);
    };
    // Dressed edge state closest to the diabatic target: removes the O(1/w)
    // preparation/readout ringing while agreeing with the band state to
    // O(1/w^2) once |alpha t_edge| >> |V| holds.
    auto dressed = [&](double t) {
        const EigenSystem eig = hermitian_eig(h_at(t));
        Eigen::Index best = 0;
        double overlap = -1.0;
        for (Eigen::Index c = 0; c < 2 * n; ++c) {
            const double o = std::norm(eig.vectors.col(c).dot(diabatic));
            if (o > overlap) {
                overlap = o;
                best = c;
            }
        }
        return Vector(eig.vectors.col(best));
    };

    Vector psi = sweep.initial_state ? diabatic : dressed(sweep.t_start);

    LZResult result;
    record_sample(result.trace, sweep.t_start, psi, nullptr, true, std::nullopt);
    for (long s = 1; s <= steps; ++s) {
        const double t_mid = sweep.t_start + (static_cast<double>(s) - 0.5) * dt_eff;
        psi = propagate_step(h_at(t_mid), psi, dt_eff);
        if (s % stride == 0 || s == steps)
            record_sample(result.trace, sweep.t_start + s * dt_eff, psi, nullptr, true,
                          std::nullopt);
    }
    result.p_stay = sweep.initial_state ? psi.head(n).squaredNorm()
                                        : std::norm(dressed(sweep.t_end).dot(psi));
    return result;
}

double lz_p_stay_extrapolated(const HamiltonianModel& model, const ParameterPoint& lambda,
                              const DrivePulse& pulse, double alpha,
                              Eigen::Index state_index, double window_factor) {
    const BandDecomposition bands = decompose_bands(model, lambda);
    const CouplingOperator op =
        pulse.two_tone()
            ? coupling_operator(model, lambda, bands, -1, pulse.j, *pulse.k, pulse.phase)
            : coupling_operator_single(model, lambda, bands, -1, pulse.j);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
    if (state_index < 0 || state_index >= basis.eigenvalues.size())
        throw IndexOutOfRange("lz_p_stay_extrapolated: state index out of range");
    const double v = pulse.amplitude * std::sqrt(std::max(0.0, basis.eigenvalues(state_index)));
    if (v <= 0.0) return 1.0;

    auto run_window = [&](double factor) {
        LZSweep sweep;
        sweep.alpha = alpha;
        sweep.pulse = pulse;
        sweep.state_index = state_index;
        sweep.window_factor = window_factor;
        const double t_edge = factor * v / alpha;
        sweep.t_start = -t_edge;
        sweep.t_end = t_edge;
        // Resolve both the edge phase rate and the coupling.
        const double dt = std::min(0.05 / (2.0 * alpha * t_edge), 0.05 / v);
        return lz_run(model, lambda, sweep, dt).p_stay;
    };

    const double p1 = run_window(window_factor);
    const double p2 = run_window(2.0 * window_factor);
    // Edge contamination falls off ~ 1/window^2; Richardson on two windows.
    return (4.0 * p2 - p1) / 3.0;
}

double spectral_visibility(const std::vector<double>& trace, double dt, double freq_max) {
    const std::vector<double> mag = spectrum_magnitudes(trace);
    const int n = static_cast<int>(trace.size());
    const double bin = 2.0 * M_PI / (n * dt);
    int kmax = static_cast<int>(freq_max / bin);
    kmax = std::min<int>(kmax, static_cast<int>(mag.size()) - 1);
    if (kmax < 4) return 1.0;

    std::vector<double> range(mag.begin() + 1, mag.begin() + kmax + 1);
    std::vector<double> sorted(range);
    std::sort(sorted.begin(), sorted.end());
    const double floor_mag = std::max(sorted[sorted.size() / 2], 1e-300);

    double best = 0.0;
    for (int k = 1; k + 1 < static_cast<int>(range.size()); ++k)
        if (range[static_cast<size_t>(k)] > range[static_cast<size_t>(k - 1)] &&
            range[static_cast<size_t>(k)] >= range[static_cast<size_t>(k + 1)])
            best = std::max(best, range[static_cast<size_t>(k)]);
    return best > 0.0 ? best / floor_mag : 1.0;
}

std::vector<RWAValidityPoint> rwa_validity(const HamiltonianModel& model,
                                           const std::vector<ParameterPoint>& path,
                                           const DrivePulse& pulse) {
    std::vector<RWAValidityPoint> report;
    for (const ParameterPoint& lambda : path) {
        RWAValidityPoint point;
        point.lambda = lambda;
        try {
            const BandDecomposition bands = decompose_bands(model, lambda);
            point.gap = bands.gap;
            const Eigen::Index n = bands.degeneracy();

            // Bound the comparison to a few Rabi periods: the diagnostic is
            // about RWA validity, not about secular phase drift over
            // arbitrarily long pulses.
            DrivePulse probe = pulse;
            if (probe.amplitude > 0.0) {
                const RWASystem sys = rwa_hamiltonian(model, lambda, probe);
                const Eigen::JacobiSVD<Matrix> svd(sys.coupling);
                const RealVector s = svd.singularValues();
                double s_min = s(0);
                for (Eigen::Index i = 0; i < s.size(); ++i)
                    if (s(i) > 1e-3 * s(0)) s_min = s(i);
                if (s_min > 0.0) {
                    const double three_periods = 3.0 * M_PI / s_min;
                    if (probe.duration <= 0.0 || probe.duration > three_periods)
                        probe.duration = three_periods;
                }
            }
            if (probe.duration <= 0.0) probe.duration = 2.0 * M_PI / probe.omega;

            Vector psi_full = bands.frame_minus.col(0);
            Vector psi_rwa = Vector::Zero(2 * n);
            psi_rwa(0) = 1.0;

            const double dt = (2.0 * M_PI / probe.omega) / 64.0;
            const PopulationTrace full =
                evolve(model, lambda, probe, psi_full, dt, EvolveMode::full);
            const PopulationTrace rwa =
                evolve(model, lambda, probe, psi_rwa, dt, EvolveMode::rwa);

            const size_t samples = std::min(full.pop_minus.size(), rwa.pop_minus.size());
            double disc = 0.0;
            for (size_t i = 0; i < samples; ++i)
                disc = std::max(disc, std::abs(full.pop_minus[i] - rwa.pop_minus[i]));
            point.discrepancy = disc;

            const double dt_sample = full.times.size() > 1 ? full.times[1] - full.times[0] : dt;
            point.peak_visibility =
                spectral_visibility(full.pop_plus, dt_sample, pulse.omega / 2.0);
        } catch (const GapCollapse&) {
            point.gap = 0.0;
            point.discrepancy = 1.0;
            point.peak_visibility = 0.0;
        } catch (const NotTwoBand&) {
            // e.g. exactly at a critical point: flag instead of throwing.
            point.gap = 0.0;
            point.discrepancy = 1.0;
            point.peak_visibility = 0.0;
        }
        point.flagged = point.discrepancy > 0.1;
        report.push_back(std::move(point));
    }
    return report;
}

} // namespace qgt
