#include "qgt/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "qgt/sweep.hpp"

namespace qgt {

namespace {

constexpr Complex kI{0.0, 1.0};

double safe_sqrt(double x) { return std::sqrt(std::max(0.0, x)); }

// Ideal commensuration target: even pairs get +-identity, odd pairs the
// -i sigma_x half-cycle, signs taken from the actual rotation angles.
Vector ideal_target(const RealVector& omegas, const std::vector<int>& partition, double t,
                    const Vector& c0) {
    const Eigen::Index n = omegas.size();
    Vector target(2 * n);
    for (Eigen::Index nu = 0; nu < n; ++nu) {
        const double angle = omegas(nu) * t;
        if (partition[static_cast<size_t>(nu)] == 0) {
            const double s = std::cos(angle) >= 0.0 ? 1.0 : -1.0;
            target(nu) = s * c0(nu);
            target(n + nu) = s * c0(n + nu);
        } else {
            const double s = std::sin(angle) >= 0.0 ? 1.0 : -1.0;
            target(nu) = -kI * s * c0(n + nu);
            target(n + nu) = -kI * s * c0(nu);
        }
    }
    return target;
}

std::vector<MeasurementRecord> measure_bands(const Vector& state, MeasureMode mode,
                                             std::mt19937_64* rng, unsigned long seed) {
    const Eigen::Index n = state.size() / 2;
    const double p_minus = state.head(n).squaredNorm();
    const double p_plus = state.tail(n).squaredNorm();

    auto branch_record = [&](int outcome) {
        MeasurementRecord rec;
        rec.outcome = outcome;
        rec.p_minus = p_minus;
        rec.p_plus = p_plus;
        rec.post_state = Vector::Zero(2 * n);
        if (outcome < 0 && p_minus > 1e-12)
            rec.post_state.head(n) = state.head(n) / std::sqrt(p_minus);
        else if (outcome > 0 && p_plus > 1e-12)
            rec.post_state.tail(n) = state.tail(n) / std::sqrt(p_plus);
        rec.rng_tag = mode == MeasureMode::branch ? "deterministic-branch"
                                                  : "seed " + std::to_string(seed);
        return rec;
    };

    std::vector<MeasurementRecord> records;
    if (mode == MeasureMode::branch) {
        if (p_minus > 1e-12) records.push_back(branch_record(-1));
        if (p_plus > 1e-12) records.push_back(branch_record(+1));
    } else {
        std::bernoulli_distribution pick_plus(std::clamp(p_plus, 0.0, 1.0));
        records.push_back(branch_record(pick_plus(*rng) ? +1 : -1));
    }
    return records;
}

double sampled_probability(double p, long shots, std::mt19937_64& rng) {
    std::binomial_distribution<long> dist(shots, std::clamp(p, 0.0, 1.0));
    return static_cast<double>(dist(rng)) / static_cast<double>(shots);
}

} // namespace

PairBasis pair_basis(const RWASystem& sys) {
    const Eigen::Index n = sys.coupling.rows();
    Eigen::JacobiSVD<Matrix> svd(sys.coupling, Eigen::ComputeFullU | Eigen::ComputeFullV);

    PairBasis basis;
    basis.rabi = svd.singularValues();
    basis.u = svd.matrixU();
    fix_column_phases(basis.u);
    basis.v = svd.matrixV();
    fix_column_phases(basis.v);  // only dark pairs keep this convention
    const double s_max = std::max(basis.rabi(0), 1e-300);
    for (Eigen::Index nu = 0; nu < n; ++nu) {
        // Phase-lock the upper partner of every bright pair so the coupling
        // diagonal is real >= 0 (exact -i sin / cos rotations).
        if (basis.rabi(nu) > 1e-12 * s_max)
            basis.v.col(nu) = sys.coupling.adjoint() * basis.u.col(nu) / basis.rabi(nu);
    }
    return basis;
}

RabiSpectrum rabi_spectroscopy(const HamiltonianModel& model, const ParameterPoint& lambda,
                               int band_sign, const DrivePulse& pulse,
                               const std::optional<Vector>& psi0, EvolveMode mode,
                               int record_len) {
    const BandDecomposition bands = decompose_bands(model, lambda);
    const Eigen::Index n = bands.degeneracy();

    DrivePulse drive = pulse;
    if (drive.omega <= 0.0) drive.omega = bands.gap;  // auto-resonant
    if (drive.duration <= 0.0) {
        // Auto-size to 100 population periods of the slowest bright pair.
        const PairBasis basis = pair_basis(rwa_hamiltonian(model, lambda, drive));
        double omega_min = basis.rabi(0);
        for (Eigen::Index i = 0; i < basis.rabi.size(); ++i)
            if (basis.rabi(i) > 1e-3 * basis.rabi(0)) omega_min = basis.rabi(i);
        if (omega_min <= 0.0) throw NoPeaks("rabi_spectroscopy: drive has no coupling");
        drive.duration = 100.0 * M_PI / omega_min;
    }

    Vector initial;
    if (psi0) {
        initial = *psi0;
    } else if (mode == EvolveMode::rwa) {
        initial = Vector::Zero(2 * n);
        initial.head(n).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    } else {
        initial = bands.frame_minus * Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    }

    const double dt = (2.0 * M_PI / drive.omega) / 64.0;
    const long steps = std::max(1L, std::lround(drive.duration / dt));
    const int stride = static_cast<int>(std::max(1L, steps / std::max(record_len, 16)));

    const PopulationTrace trace =
        evolve(model, lambda, drive, initial, dt, mode, std::nullopt, stride);
    if (trace.times.size() < 17) throw TooShort("rabi_spectroscopy: trace too short");
    const double dt_sample = trace.times[1] - trace.times[0];

    // Drop the final off-stride sample so the series is uniform.
    std::vector<double> series(trace.pop_plus.begin(), trace.pop_plus.end());
    if (trace.times.size() >= 2) {
        const double last_gap = trace.times.back() - trace.times[trace.times.size() - 2];
        if (std::abs(last_gap - dt_sample) > 1e-9 * dt_sample) series.pop_back();
    }

    RabiSpectrum spectrum;
    spectrum.drive = drive;
    spectrum.basis_tag = drive.two_tone()
                             ? "two-tone coupling eigenbasis (phi=" + std::to_string(drive.phase) +
                                   "), band " + (band_sign < 0 ? std::string("-") : std::string("+"))
                             : "Q_jj eigenbasis, j=" + std::to_string(drive.j) + ", band " +
                                   (band_sign < 0 ? std::string("-") : std::string("+"));
    spectrum.peaks = dominant_frequencies(series, dt_sample, static_cast<int>(n));
    if (spectrum.peaks.empty()) throw NoPeaks("rabi_spectroscopy: no oscillation detected");

    std::vector<double> freqs;
    for (const SpectralPeak& p : spectrum.peaks) freqs.push_back(p.frequency);
    std::sort(freqs.rbegin(), freqs.rend());
    for (double f : freqs) {
        // Population oscillates at twice the amplitude Rabi frequency.
        const double omega_rabi = f / 2.0;
        spectrum.inferred_q.push_back(std::pow(omega_rabi / pulse.amplitude, 2));
    }
    return spectrum;
}

PreparationPlan plan_preparation(const RealVector& omegas, const std::vector<int>& partition,
                                 double t_max, double tol, long n_min, long n_max) {
    const Eigen::Index n = omegas.size();
    if (n < 1 || static_cast<Eigen::Index>(partition.size()) != n)
        throw InvalidSetting("plan_preparation: partition/frequency size mismatch");
    if (omegas.minCoeff() <= 0.0)
        throw InvalidSetting("plan_preparation: frequencies must be positive");
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b)
            if (std::abs(omegas(a) - omegas(b)) <= tol * omegas.maxCoeff())
                throw DegenerateRabi("plan_preparation: indistinguishable Rabi frequencies");

    Eigen::Index base = -1;
    bool base_even = true;
    for (Eigen::Index i = 0; i < n && base < 0; ++i)
        if (partition[static_cast<size_t>(i)] == 0) base = i;
    if (base < 0) {
        base = 0;
        base_even = false;
    }

    auto evaluate = [&](double t, double& branch) {
        double sum = 0.0;
        branch = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double angle = omegas(i) * t;
            if (partition[static_cast<size_t>(i)] == 0) {
                sum += std::abs(std::cos(angle));
                branch *= std::cos(angle) * std::cos(angle);
            } else {
                sum += std::abs(std::sin(angle));
                branch *= std::sin(angle) * std::sin(angle);
            }
        }
        return (sum / n) * (sum / n);
    };

    const double step = M_PI / omegas(base);
    long grid_max = static_cast<long>(std::floor(t_max * omegas(base) / M_PI - (base_even ? 0.0 : 0.5)));
    if (n_max > 0) grid_max = std::min(grid_max, n_max);

    PreparationPlan best;
    best.predicted_fidelity = -1.0;
    for (long i = std::max(1L, n_min); i <= grid_max; ++i) {
        const double t = base_even ? i * step : (i - 0.5) * step;
        double branch = 0.0;
        const double fid = evaluate(t, branch);
        if (fid > best.predicted_fidelity + 1e-12) {
            best.predicted_fidelity = fid;
            best.branch_probability = branch;
            best.duration = t;
        }
    }
    if (best.predicted_fidelity < 0.5)
        throw NoPlan("plan_preparation: no duration reaches fidelity 0.5 within T_max");

    best.partition = partition;
    best.omegas = omegas;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double cycles = omegas(i) * best.duration / M_PI;
        if (partition[static_cast<size_t>(i)] == 0)
            best.even_n.push_back(std::lround(cycles));
        else
            best.odd_m.push_back(std::lround(cycles - 0.5));
    }
    return best;
}

PreparationOutcome prepare_run(const RealVector& omegas, const PreparationPlan& plan,
                               const Vector& c0, MeasureMode mode, unsigned long seed) {
    const Eigen::Index n = omegas.size();
    if (c0.size() != 2 * n) throw InvalidSetting("prepare_run: state must be 2N-dimensional");

    // Decoupled-pair RWA Hamiltonian; propagated rather than rotated in closed
    // form so the simulation path is exercised.
    Matrix h = Matrix::Zero(2 * n, 2 * n);
    for (Eigen::Index nu = 0; nu < n; ++nu) {
        h(nu, n + nu) = omegas(nu);
        h(n + nu, nu) = omegas(nu);
    }
    const HermitianMatrix hm(h);
    const long steps = 64;
    const double dt = plan.duration / steps;
    Vector psi = c0;
    for (long s = 0; s < steps; ++s) psi = propagate_step(hm, psi, dt);

    PreparationOutcome outcome;
    outcome.final_state = psi;
    const Vector target = ideal_target(omegas, plan.partition, plan.duration, c0);
    outcome.fidelity = std::norm(target.dot(psi));

    std::mt19937_64 rng(seed);
    outcome.records = measure_bands(psi, mode, &rng, seed);
    return outcome;
}

PreparationOutcome prepare_eigenstate(const HamiltonianModel& model,
                                      const ParameterPoint& lambda, const DrivePulse& pulse,
                                      const Vector& psi0_pairs, const PreparationPlan& plan,
                                      MeasureMode mode, unsigned long seed) {
    const RWASystem sys = rwa_hamiltonian(model, lambda, pulse);
    const PairBasis basis = pair_basis(sys);
    const Eigen::Index n = basis.rabi.size();
    if (psi0_pairs.size() != n)
        throw InvalidSetting("prepare_eigenstate: psi0 must hold N pair amplitudes");
    if (plan.omegas.size() != n)
        throw PlanMismatch("prepare_eigenstate: plan has wrong pair count");
    for (Eigen::Index nu = 0; nu < n; ++nu) {
        const double ref = std::max(basis.rabi(nu), 1e-300);
        if (std::abs(plan.omegas(nu) - basis.rabi(nu)) > 0.05 * ref)
            throw PlanMismatch("prepare_eigenstate: plan frequencies deviate > 5%");
    }

    Vector c0 = Vector::Zero(2 * n);
    c0.head(n) = basis.u * psi0_pairs.normalized();

    const double dt = (2.0 * M_PI / pulse.omega) / 64.0;
    DrivePulse timed = pulse;
    timed.duration = plan.duration;
    const PopulationTrace trace =
        evolve(model, lambda, timed, c0, dt, EvolveMode::rwa, std::nullopt, 1 << 30);

    // Recover the end state in pair coordinates.
    // evolve() does not return the state; propagate again in one exact step.
    const EigenSystem eig = hermitian_eig(sys.hamiltonian);
    Vector phases(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i)
        phases(i) = std::exp(-kI * eig.values(i) * plan.duration);
    Vector c_final = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint() * c0;
    (void)trace;

    // Remove the common band phase e^{-i e0 T} so pair coordinates match the
    // rotating-frame convention of the closed form.
    const double e0 = 0.5 * (sys.bands.energy_minus + sys.bands.energy_plus);
    c_final *= std::exp(kI * e0 * plan.duration);

    Vector pairs(2 * n);
    pairs.head(n) = basis.u.adjoint() * c_final.head(n);
    pairs.tail(n) = basis.v.adjoint() * c_final.tail(n);

    Vector pairs0(2 * n);
    pairs0.head(n) = psi0_pairs.normalized();
    pairs0.tail(n).setZero();

    PreparationOutcome outcome;
    outcome.final_state = pairs;
    const Vector target = ideal_target(basis.rabi, plan.partition, plan.duration, pairs0);
    outcome.fidelity = std::norm(target.dot(pairs));
    std::mt19937_64 rng(seed);
    outcome.records = measure_bands(pairs, mode, &rng, seed);
    return outcome;
}

IterationResult iterate_preparation(const RealVector& omegas,
                                    const std::vector<std::vector<int>>& round_partitions,
                                    const Vector& c0, double t_max, MeasureMode mode,
                                    unsigned long seed) {
    const Eigen::Index n = omegas.size();
    if (n > 4) throw InvalidSetting("iterate_preparation: N <= 4 supported");
    if (c0.size() != 2 * n)
        throw InvalidSetting("iterate_preparation: state must be 2N-dimensional");

    std::mt19937_64 rng(seed);
    IterationResult result;
    Vector state = c0.normalized();
    std::vector<Eigen::Index> active(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) active[static_cast<size_t>(i)] = i;
    int current_band = -1;

    size_t round = 0;
    while (active.size() > 1) {
        if (round >= round_partitions.size())
            throw NoPlan("iterate_preparation: plan tree exhausted before convergence");
        const std::vector<int>& partition = round_partitions[round];
        if (partition.size() != active.size())
            throw InvalidSetting("iterate_preparation: partition size mismatch");

        RealVector sub(static_cast<Eigen::Index>(active.size()));
        for (size_t i = 0; i < active.size(); ++i) sub(static_cast<Eigen::Index>(i)) = omegas(active[i]);
        const PreparationPlan plan = plan_preparation(sub, partition, t_max);

        // All pairs rotate, active or not.
        state = pair_rotation(omegas, plan.duration, state);

        std::vector<MeasurementRecord> records = measure_bands(state, mode, &rng, seed);
        MeasurementRecord chosen;
        if (mode == MeasureMode::sample) {
            chosen = records.front();
        } else {
            chosen = records.front();
            for (const MeasurementRecord& rec : records) {
                const double p = rec.outcome < 0 ? rec.p_minus : rec.p_plus;
                const double pc = chosen.outcome < 0 ? chosen.p_minus : chosen.p_plus;
                if (p > pc) chosen = rec;
            }
        }
        state = chosen.post_state;
        result.chain.push_back(chosen);

        // Even pairs stay in the band they started in, odd pairs swap; the
        // measured band keeps whichever subset landed there.
        const bool keep_even = chosen.outcome == current_band;
        std::vector<Eigen::Index> next;
        for (size_t i = 0; i < active.size(); ++i)
            if ((partition[i] == 0) == keep_even) next.push_back(active[i]);
        if (next.empty())
            throw NoPlan("iterate_preparation: measured branch holds no planned pairs");
        active = std::move(next);
        current_band = chosen.outcome;
        ++round;
    }

    result.final_pair = active.front();
    const Eigen::Index slot =
        current_band < 0 ? result.final_pair : n + result.final_pair;
    result.final_fidelity = std::norm(state(slot));
    return result;
}

Matrix hadamard_in_subspace(const Matrix& frame, Eigen::Index mu1, Eigen::Index mu2) {
    const Eigen::Index n = frame.cols();
    if (mu1 == mu2 || mu1 < 0 || mu2 < 0 || mu1 >= n || mu2 >= n)
        throw IndexOutOfRange("hadamard_in_subspace: invalid column pair");
    const Vector f1 = frame.col(mu1);
    const Vector f2 = frame.col(mu2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Matrix g = Matrix::Identity(frame.rows(), frame.rows());
    g -= f1 * f1.adjoint() + f2 * f2.adjoint();
    g += inv_sqrt2 * ((f1 + f2) * f1.adjoint() + (f1 - f2) * f2.adjoint());
    return g;
}

Matrix phase_gate_in_subspace(const Matrix& frame, Eigen::Index mu1, Eigen::Index mu2) {
    const Eigen::Index n = frame.cols();
    if (mu1 == mu2 || mu1 < 0 || mu2 < 0 || mu1 >= n || mu2 >= n)
        throw IndexOutOfRange("phase_gate_in_subspace: invalid column pair");
    const Vector f2 = frame.col(mu2);
    Matrix g = Matrix::Identity(frame.rows(), frame.rows());
    g += (kI - 1.0) * (f2 * f2.adjoint());
    return g;
}

MixingTransform tomography_mixing(const HamiltonianModel& model, const ParameterPoint& lambda,
                                  const DrivePulse& single_pulse,
                                  const DrivePulse& two_tone_pulse, int band_sign,
                                  MeasureMode mode, double t_max, long shots,
                                  unsigned long seed) {
    const RWASystem sys_single = rwa_hamiltonian(model, lambda, single_pulse);
    const RWASystem sys_two = rwa_hamiltonian(model, lambda, two_tone_pulse);
    const Eigen::Index n = sys_single.bands.degeneracy();
    if (n != 2) throw InvalidSetting("tomography_mixing: explicit construction needs N = 2");

    const PairBasis tilde = pair_basis(sys_single);
    const PairBasis bar = pair_basis(sys_two);
    if (std::abs(bar.rabi(0) - bar.rabi(1)) <= 0.02 * bar.rabi(0))
        throw DegenerateRabi("tomography_mixing: two-tone pairs indistinguishable");

    PreparationPlan plan;
    try {
        plan = plan_preparation(bar.rabi, {0, 1}, t_max);
    } catch (const NoPlan&) {
        plan = plan_preparation(bar.rabi, {1, 0}, t_max);
    }
    const size_t even_idx = plan.partition[0] == 0 ? 0 : 1;
    const size_t odd_idx = 1 - even_idx;

    const Matrix& tilde_side = band_sign < 0 ? tilde.u : tilde.v;
    const Matrix& bar_side = band_sign < 0 ? bar.u : bar.v;
    const Matrix& frame = sys_two.bands.frame(band_sign);
    const Matrix bar_frame = frame * bar_side;  // D x N, |psi_bar_mu>

    // Gates conjugated into band-coefficient space.
    const Matrix gate_h =
        frame.adjoint() * hadamard_in_subspace(bar_frame, 0, 1) * frame;
    const Matrix gate_s =
        frame.adjoint() * phase_gate_in_subspace(bar_frame, 0, 1) * frame;

    const double dt = (2.0 * M_PI / two_tone_pulse.omega) / 64.0;
    DrivePulse timed = two_tone_pulse;
    timed.duration = plan.duration;

    std::mt19937_64 rng(seed);
    auto same_band_probability = [&](const Vector& band_block) {
        Vector c0 = Vector::Zero(2 * n);
        if (band_sign < 0)
            c0.head(n) = band_block;
        else
            c0.tail(n) = band_block;
        c0.normalize();
        const PopulationTrace trace =
            evolve(model, lambda, timed, c0, dt, EvolveMode::rwa, std::nullopt, 1 << 30);
        double p = band_sign < 0 ? trace.pop_minus.back() : trace.pop_plus.back();
        if (mode == MeasureMode::sample) p = sampled_probability(p, shots, rng);
        return p;
    };

    MixingTransform transform;
    transform.band = band_sign;
    transform.plan = plan;
    transform.entries = Matrix::Zero(n, n);
    transform.ground_truth = Matrix::Zero(n, n);
    for (Eigen::Index nu = 0; nu < n; ++nu)
        for (Eigen::Index mu = 0; mu < n; ++mu)
            transform.ground_truth(nu, mu) = bar_side.col(mu).dot(tilde_side.col(nu));

    for (Eigen::Index nu = 0; nu < n; ++nu) {
        const Vector prep = tilde_side.col(nu);
        const double p_plain = same_band_probability(prep);
        const double p_hadamard = same_band_probability(gate_h * prep);
        const double p_phase = same_band_probability(gate_h * (gate_s * prep));

        // Even pair stays in its band, odd pair transfers.
        const double mag_even = safe_sqrt(p_plain);
        const double mag_odd = safe_sqrt(1.0 - p_plain);
        double delta = 0.0;  // phase(even) - phase(odd)
        if (mag_even * mag_odd > 1e-9) {
            const double cos_d =
                std::clamp((p_hadamard - 0.5) / (mag_even * mag_odd), -1.0, 1.0);
            const double sin_d =
                std::clamp((p_phase - 0.5) / (mag_even * mag_odd), -1.0, 1.0);
            delta = std::atan2(sin_d, cos_d);
        }
        transform.entries(nu, static_cast<Eigen::Index>(even_idx)) = mag_even;
        transform.entries(nu, static_cast<Eigen::Index>(odd_idx)) =
            mag_odd * std::exp(-kI * delta);
    }
    return transform;
}

ExtractionResult extract_metric_curvature(const HamiltonianModel& model,
                                          const ParameterPoint& lambda, Eigen::Index j,
                                          Eigen::Index k, double amplitude, MeasureMode mode,
                                          double t_max, long shots, unsigned long seed) {
    const BandDecomposition bands = decompose_bands(model, lambda);
    const Eigen::Index n = bands.degeneracy();
    if (n > 2) throw InvalidSetting("extract_metric_curvature: N <= 2 supported");
    const double omega = bands.gap;

    auto make_pulse = [&](Eigen::Index jj, std::optional<Eigen::Index> kk, double phi) {
        DrivePulse pulse;
        pulse.j = jj;
        pulse.k = kk;
        pulse.amplitude = amplitude;
        pulse.omega = omega;
        pulse.phase = phi;
        return pulse;
    };

    auto spectroscopy_q = [&](DrivePulse pulse) {
        // Size the trace from the slowest bright pair of this drive.
        const RWASystem sys = rwa_hamiltonian(model, lambda, pulse);
        const PairBasis basis = pair_basis(sys);
        double omega_min = basis.rabi(0);
        for (Eigen::Index i = 0; i < basis.rabi.size(); ++i)
            if (basis.rabi(i) > 1e-3 * basis.rabi(0)) omega_min = basis.rabi(i);
        if (omega_min <= 0.0) throw NoPeaks("extract_metric_curvature: drive has no coupling");
        pulse.duration = 100.0 * M_PI / omega_min;
        return rabi_spectroscopy(model, lambda, -1, pulse, std::nullopt, EvolveMode::rwa, 8192);
    };

    const RabiSpectrum spec_j = spectroscopy_q(make_pulse(j, std::nullopt, 0.0));
    const RabiSpectrum spec_k = spectroscopy_q(make_pulse(k, std::nullopt, 0.0));
    const RabiSpectrum spec_circ = spectroscopy_q(make_pulse(j, k, M_PI / 2.0));
    const RabiSpectrum spec_lin = spectroscopy_q(make_pulse(j, k, 0.0));

    ExtractionResult result;
    result.q_single_j = Eigen::Map<const RealVector>(spec_j.inferred_q.data(),
                                                     static_cast<Eigen::Index>(spec_j.inferred_q.size()));
    result.q_single_k = Eigen::Map<const RealVector>(spec_k.inferred_q.data(),
                                                     static_cast<Eigen::Index>(spec_k.inferred_q.size()));

    // Ground truth in the respective bar bases (band minus).
    const CouplingOperator op_circ = coupling_operator(model, lambda, bands, -1, j, k, M_PI / 2.0);
    const CouplingOperator op_lin = coupling_operator(model, lambda, bands, -1, j, k, 0.0);
    const QGTensor q_jk = qgt_resolvent(model, lambda, bands, -1, j, k);
    const Matrix f_frame = curvature(q_jk);
    const Matrix g_frame = metric(q_jk);

    if (n == 1) {
        const double qj = result.q_single_j(0);
        const double qk = result.q_single_k(0);
        const double s_circ = spec_circ.inferred_q.at(0);
        const double s_lin = spec_lin.inferred_q.at(0);
        result.curvature_est = Matrix::Constant(1, 1, qj + qk - s_circ);
        result.metric_est = Matrix::Constant(1, 1, 0.5 * (s_lin - qj - qk));
        result.curvature_truth = f_frame;
        result.metric_truth = g_frame;
    } else {
        // A single peak for an N-fold band means the combination operator is
        // proportional to the identity (its symmetric part always is when the
        // gradients anticommute), which every basis diagonalizes.
        auto combo_diag = [&](const std::vector<double>& q_list, const char* what) {
            Matrix d = Matrix::Zero(n, n);
            if (q_list.size() == 1)
                d = q_list.front() * Matrix::Identity(n, n);
            else if (static_cast<Eigen::Index>(q_list.size()) == n)
                for (Eigen::Index i = 0; i < n; ++i) d(i, i) = q_list[static_cast<size_t>(i)];
            else
                throw NoPeaks(std::string("extract_metric_curvature: ") + what +
                              " peak count matches neither 1 nor N");
            return d;
        };
        if (t_max <= 0.0) {
            const RWASystem sys = rwa_hamiltonian(model, lambda, make_pulse(j, k, M_PI / 2.0));
            t_max = 80.0 * M_PI / pair_basis(sys).rabi(1);
        }

        auto rotated_q = [&](const DrivePulse& single, const DrivePulse& two_tone,
                             const RealVector& q_single) {
            // One peak for an N-fold band means Q_jj = q I (true for every
            // anticommuting-gradient model): basis rotation is a no-op.
            if (q_single.size() == 1)
                return Matrix(q_single(0) * Matrix::Identity(n, n));
            if (q_single.size() != n)
                throw NoPeaks("extract_metric_curvature: single-drive peak count != N");
            const MixingTransform tomo = tomography_mixing(model, lambda, single, two_tone, -1,
                                                           mode, t_max, shots, seed);
            const Matrix b = tomo.entries.transpose();
            // Branch-mode tomography is limited by the commensuration-plan
            // infidelity (~1 - F_plan), so a few percent is the honest bound.
            if ((b * b.adjoint() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 5e-2 &&
                mode == MeasureMode::branch)
                throw InconsistentBases("extract_metric_curvature: mixing transform not unitary");
            Matrix diag = Matrix::Zero(n, n);
            for (Eigen::Index i = 0; i < n; ++i) diag(i, i) = q_single(i);
            return Matrix(b * diag * b.adjoint());
        };

        const DrivePulse pj = make_pulse(j, std::nullopt, 0.0);
        const DrivePulse pk = make_pulse(k, std::nullopt, 0.0);
        const DrivePulse pcirc = make_pulse(j, k, M_PI / 2.0);
        const DrivePulse plin = make_pulse(j, k, 0.0);

        const Matrix qjj_circ = rotated_q(pj, pcirc, result.q_single_j);
        const Matrix qkk_circ = rotated_q(pk, pcirc, result.q_single_k);
        const Matrix qjj_lin = rotated_q(pj, plin, result.q_single_j);
        const Matrix qkk_lin = rotated_q(pk, plin, result.q_single_k);

        const Matrix s_circ = combo_diag(spec_circ.inferred_q, "circular");
        const Matrix s_lin = combo_diag(spec_lin.inferred_q, "linear");

        // Band minus: eigenvalues of Q_jj + Q_kk - F_jk (phi = pi/2) and
        // Q_jj + Q_kk + 2 g_jk (phi = 0).
        result.curvature_est = qjj_circ + qkk_circ - s_circ;
        result.metric_est = 0.5 * (s_lin - qjj_lin - qkk_lin);

        const Matrix u_bar_circ = pair_basis(rwa_hamiltonian(model, lambda, pcirc)).u;
        const Matrix u_bar_lin = pair_basis(rwa_hamiltonian(model, lambda, plin)).u;
        result.curvature_truth = u_bar_circ.adjoint() * f_frame * u_bar_circ;
        result.metric_truth = u_bar_lin.adjoint() * g_frame * u_bar_lin;
        (void)op_circ;
        (void)op_lin;
    }

    // Normalize by the common geometric scale: either tensor may vanish
    // identically (e.g. g_theta_phi = 0 on the Bloch sphere).
    const double scale = std::max(
        {result.curvature_truth.norm(), result.metric_truth.norm(), 1e-300});
    result.curvature_error = (result.curvature_est - result.curvature_truth).norm() / scale;
    result.metric_error = (result.metric_est - result.metric_truth).norm() / scale;
    return result;
}

LZExtraction lz_extraction(const HamiltonianModel& model, const ParameterPoint& lambda,
                           const DrivePulse& pulse, const std::vector<double>& alphas,
                           Eigen::Index state_index, double window_factor, int jobs) {
    if (alphas.empty()) throw InvalidSetting("lz_extraction: empty alpha list");
    const BandDecomposition bands = decompose_bands(model, lambda);
    const CouplingOperator op =
        pulse.two_tone()
            ? coupling_operator(model, lambda, bands, -1, pulse.j, *pulse.k, pulse.phase)
            : coupling_operator_single(model, lambda, bands, -1, pulse.j);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
    if (state_index < 0 || state_index >= basis.eigenvalues.size())
        throw IndexOutOfRange("lz_extraction: state index out of range");

    const double q_truth = basis.eigenvalues(state_index);
    const double v_sq = pulse.amplitude * pulse.amplitude * q_truth;
    for (double alpha : alphas)
        if (alpha < 10.0 * v_sq)
            throw AsymptoticViolation("lz_extraction: alpha below asymptotic regime 10 |V|^2");

    const std::vector<double> transfer = parallel_map<double>(
        alphas.size(),
        [&](std::size_t i) {
            return 1.0 - lz_p_stay_extrapolated(model, lambda, pulse, alphas[i], state_index,
                                                window_factor);
        },
        jobs);

    // Weighted least squares through the origin for 1 - P = pi A^2 q / alpha.
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < alphas.size(); ++i) {
        const double x = M_PI * pulse.amplitude * pulse.amplitude / alphas[i];
        const double w = 1.0 / std::max(transfer[i] * transfer[i], 1e-30);
        num += w * x * transfer[i];
        den += w * x * x;
    }
    LZExtraction fit;
    fit.q_fit = num / den;
    fit.q_truth = q_truth;
    fit.alphas = alphas;
    fit.transfer = transfer;
    for (size_t i = 0; i < alphas.size(); ++i) {
        const double predicted = fit.q_fit * M_PI * pulse.amplitude * pulse.amplitude / alphas[i];
        fit.residual = std::max(fit.residual,
                                std::abs(transfer[i] - predicted) / std::max(predicted, 1e-30));
    }
    if (fit.residual > 0.1) throw FitPoor("lz_extraction: linear LZ law residual above 10%");
    return fit;
}

} // namespace qgt
