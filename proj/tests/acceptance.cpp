// Acceptance gate: one check per acceptance criterion, one PASS/FAIL line
// each, non-zero exit when anything fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qgt/result_io.hpp"

using namespace qgt;

namespace {

ParameterPoint reference_lambda() {
    ParameterPoint l(4);
    l << 0.7, 0.3, 1.1, -0.4;
    return l;
}

ParameterPoint random_lambda(Eigen::Index m, std::mt19937_64& rng, double span = 1.5) {
    std::uniform_real_distribution<double> u(-span, span);
    ParameterPoint l(m);
    for (Eigen::Index i = 0; i < m; ++i) l(i) = u(rng);
    return l;
}

struct Check {
    bool pass = false;
    std::string detail;
};

DrivePulse make_pulse(double omega, Eigen::Index j, std::optional<Eigen::Index> k, double phi,
                      double amplitude) {
    DrivePulse pulse;
    pulse.j = j;
    pulse.k = k;
    pulse.phase = phi;
    pulse.amplitude = amplitude;
    pulse.omega = omega;
    pulse.duration = 0.0;
    return pulse;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// --- criterion 1: commensuration fidelities -------------------------------

Check criterion_preparation_fidelity() {
    RealVector omegas(2);
    omegas << 1.0, M_PI;
    Vector c0 = Vector::Zero(4);
    c0(0) = c0(1) = 1.0 / std::sqrt(2.0);

    const PreparationPlan p3 = plan_preparation(omegas, {0, 1}, 100.0, 1e-9, 3, 3);
    const PreparationPlan p25 = plan_preparation(omegas, {0, 1}, 100.0, 1e-9, 25, 25);
    const double f3 = prepare_run(omegas, p3, c0, MeasureMode::branch).fidelity;
    const double f25 = prepare_run(omegas, p25, c0, MeasureMode::branch).fidelity;

    Check c;
    c.pass = std::abs(f3 - 0.973) < 0.005 && std::abs(f25 - 0.992) < 0.005;
    c.detail = "F(3pi) = " + fmt(f3) + " vs 0.973, F(25pi) = " + fmt(f25) + " vs 0.992";
    return c;
}

// --- criterion 2: Rabi frequency law --------------------------------------

double spectroscopy_worst_error(const HamiltonianModel& model, const ParameterPoint& l,
                                EvolveMode mode) {
    const BandDecomposition bands = decompose_bands(model, l);
    const DrivePulse pulse =
        make_pulse(bands.gap, 0, 1, M_PI / 2.0, 0.02 * bands.gap);  // A / omega = 0.02
    const RabiSpectrum spec =
        rabi_spectroscopy(model, l, -1, pulse, std::nullopt, mode, 8192);

    const CouplingOperator op = coupling_operator(model, l, bands, -1, 0, 1, M_PI / 2.0);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
    if (static_cast<Eigen::Index>(spec.inferred_q.size()) != basis.eigenvalues.size())
        return 1.0;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < basis.eigenvalues.size(); ++i)
        worst = std::max(worst, std::abs(spec.inferred_q[static_cast<size_t>(i)] -
                                         basis.eigenvalues(i)) /
                                    basis.eigenvalues(i));
    return worst;
}

Check criterion_rabi_law() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const double err_rwa = spectroscopy_worst_error(model, l, EvolveMode::rwa);
    const double err_full = spectroscopy_worst_error(model, l, EvolveMode::full);
    Check c;
    c.pass = err_rwa < 0.01 && err_full < 0.03;
    c.detail = "worst q error: rwa " + fmt(err_rwa) + " (<0.01), full " + fmt(err_full) +
               " (<0.03)";
    return c;
}

// --- criterion 3: oracle equivalence ---------------------------------------

Check criterion_oracles() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (const char* name : {"spin_half", "dirac4", "dirac4_generic", "weyl4"}) {
        const HamiltonianModel model = builtin_model(name);
        int done = 0;
        while (done < 10) {
            const ParameterPoint l = random_lambda(model.param_count, rng);
            try {
                decompose_bands(model, l);
            } catch (const GapCollapse&) {
                continue;
            }
            for (int band : {-1, +1})
                for (Eigen::Index j = 0; j < 2; ++j)
                    for (Eigen::Index k = 0; k < 2; ++k) {
                        const Matrix a = qgt_resolvent(model, l, band, j, k).matrix;
                        const Matrix b = qgt_fd(model, l, band, j, k, 1e-4).matrix;
                        worst = std::max(worst, (a - b).norm() / std::max(b.norm(), 1e-12));
                    }
            ++done;
        }
    }

    const HamiltonianModel spin = builtin_model("spin_half");
    double closed = 0.0;
    for (double theta : {0.4, 1.1, M_PI / 2.0, 2.3}) {
        ParameterPoint l(2);
        l << theta, 0.5;
        const double s = std::sin(theta);
        closed = std::max(closed,
                          std::abs(qgt_resolvent(spin, l, -1, 0, 0).matrix(0, 0).real() - 0.25));
        closed = std::max(closed, std::abs(qgt_resolvent(spin, l, -1, 1, 1).matrix(0, 0).real() -
                                           0.25 * s * s));
        closed = std::max(
            closed,
            std::abs(curvature(qgt_resolvent(spin, l, -1, 0, 1))(0, 0).real() - 0.5 * s));
    }

    Check c;
    c.pass = worst <= 1e-5 && closed <= 1e-6;
    c.detail = "resolvent vs fd " + fmt(worst) + " (<=1e-5), spin_half closed forms " +
               fmt(closed) + " (<=1e-6)";
    return c;
}

// --- criterion 4: two-tone identities and extraction ------------------------

Check criterion_two_tone() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const BandDecomposition bands = decompose_bands(model, l);

    double algebraic = 0.0;
    for (int band : {-1, +1}) {
        const Matrix qjj = qgt_resolvent(model, l, bands, band, 0, 0).matrix;
        const Matrix qkk = qgt_resolvent(model, l, bands, band, 1, 1).matrix;
        const QGTensor qjk = qgt_resolvent(model, l, bands, band, 0, 1);
        const Matrix circ = coupling_operator(model, l, bands, band, 0, 1, M_PI / 2.0).matrix;
        const Matrix lin = coupling_operator(model, l, bands, band, 0, 1, 0.0).matrix;
        algebraic = std::max(algebraic, (circ - qjj - qkk - double(band) * curvature(qjk))
                                            .cwiseAbs()
                                            .maxCoeff());
        algebraic = std::max(
            algebraic, (lin - qjj - qkk - 2.0 * metric(qjk)).cwiseAbs().maxCoeff());
    }

    const ExtractionResult result =
        extract_metric_curvature(model, l, 0, 1, 0.02, MeasureMode::branch);

    Check c;
    c.pass = algebraic <= 1e-12 && result.metric_error <= 0.02 &&
             result.curvature_error <= 0.02;
    c.detail = "identities " + fmt(algebraic) + " (<=1e-12), extraction g " +
               fmt(result.metric_error) + ", F " + fmt(result.curvature_error) + " (<=0.02)";
    return c;
}

// --- criterion 5: Landau-Zener law -----------------------------------------

Check criterion_lz() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const BandDecomposition bands = decompose_bands(model, l);
    DrivePulse pulse = make_pulse(bands.gap, 0, std::nullopt, 0.0, 0.02);
    pulse.duration = 1.0;

    const CouplingOperator op = coupling_operator_single(model, l, bands, -1, 0);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
    const double v = pulse.amplitude * std::sqrt(basis.eigenvalues(0));
    const double v2 = v * v;

    // Finite-window sweeps (window factor 30) against the linear law.
    double worst_linear = 0.0;
    for (double ratio : {30.0, 50.0, 100.0}) {
        const double alpha = ratio * v2;
        LZSweep sweep;
        sweep.alpha = alpha;
        sweep.pulse = pulse;
        sweep.state_index = 0;
        sweep.window_factor = 30.0;
        const double t_edge = 30.0 * v / alpha;
        sweep.t_start = -t_edge;
        sweep.t_end = t_edge;
        const double dt = std::min(0.05 / (2.0 * alpha * t_edge), 0.05 / v);
        const double transfer = 1.0 - lz_run(model, l, sweep, dt).p_stay;
        const double linear = M_PI * v2 / alpha;
        worst_linear = std::max(worst_linear, std::abs(transfer - linear) / linear);
    }

    // Exponential law at the half-transfer point.
    const double alpha_half = M_PI * v2 / std::log(2.0);
    const double p_half = lz_p_stay_extrapolated(model, l, pulse, alpha_half, 0);
    const double dev_exp = std::abs(p_half - 0.5);

    Check c;
    c.pass = worst_linear < 0.05 && dev_exp < 0.02;
    c.detail = "linear-law deviation " + fmt(worst_linear) + " (<0.05), |P(ln2/pi) - 1/2| = " +
               fmt(dev_exp) + " (<0.02)";
    return c;
}

// --- criterion 6: Morris-Shore decoupling ----------------------------------

double worst_foreign_population(const HamiltonianModel& model, const ParameterPoint& l,
                                EvolveMode mode) {
    const BandDecomposition bands = decompose_bands(model, l);
    const Eigen::Index n = bands.degeneracy();
    DrivePulse pulse = make_pulse(bands.gap, 0, 1, M_PI / 2.0, 0.02 * bands.gap);
    const RWASystem sys = rwa_hamiltonian(model, l, pulse);
    const PairBasis basis = pair_basis(sys);
    pulse.duration = 2.0 * M_PI / basis.rabi(0);  // one full population period

    Matrix frame;
    Vector psi0;
    if (mode == EvolveMode::rwa) {
        frame = Matrix::Zero(2 * n, 2 * n);
        frame.topLeftCorner(n, n) = basis.u;
        frame.bottomRightCorner(n, n) = basis.v;
        psi0 = Vector::Zero(2 * n);
        psi0.head(n) = basis.u.col(0);
    } else {
        frame.resize(model.dim, 2 * n);
        frame.leftCols(n) = bands.frame_minus * basis.u;
        frame.rightCols(n) = bands.frame_plus * basis.v;
        psi0 = bands.frame_minus * basis.u.col(0);
    }

    const double dt = (2.0 * M_PI / pulse.omega) / 64.0;
    const PopulationTrace trace = evolve(model, l, pulse, psi0, dt, mode, frame);
    double worst = 0.0;
    for (const std::vector<double>& pops : trace.state_pop)
        for (Eigen::Index nu = 1; nu < n; ++nu) {
            worst = std::max(worst, pops[static_cast<size_t>(nu)]);
            worst = std::max(worst, pops[static_cast<size_t>(n + nu)]);
        }
    return worst;
}

Check criterion_morris_shore() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const double leak_rwa = worst_foreign_population(model, l, EvolveMode::rwa);
    const double leak_full = worst_foreign_population(model, l, EvolveMode::full);
    Check c;
    c.pass = leak_rwa <= 1e-8 && leak_full <= 1e-3;
    c.detail = "foreign-pair population: rwa " + fmt(leak_rwa) + " (<=1e-8), full " +
               fmt(leak_full) + " (<=1e-3)";
    return c;
}

// --- criterion 7: gauge invariance -----------------------------------------

Check criterion_gauge() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const BandDecomposition reference = decompose_bands(model, l);
    const Eigen::Index n = reference.degeneracy();

    const RealVector q_ref =
        diagonalize_qgt(qgt_resolvent(model, l, reference, -1, 0, 0).matrix,
                        reference.frame_minus)
            .eigenvalues;
    const RealVector circ_ref =
        diagonalize_qgt(coupling_operator(model, l, reference, -1, 0, 1, M_PI / 2.0).matrix,
                        reference.frame_minus)
            .eigenvalues;
    const Matrix c_ref = interband_coupling(model, l, reference, 0);
    const Eigen::JacobiSVD<Matrix> svd_ref(c_ref);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        Matrix a(n, n), b(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index col = 0; col < n; ++col) {
                a(r, col) = Complex(g(rng), g(rng));
                b(r, col) = Complex(g(rng), g(rng));
            }
        BandDecomposition gauged = reference;
        gauged.frame_minus = reference.frame_minus * polar_unitary(a);
        gauged.frame_plus = reference.frame_plus * polar_unitary(b);

        const RealVector q =
            diagonalize_qgt(qgt_resolvent(model, l, gauged, -1, 0, 0).matrix,
                            gauged.frame_minus)
                .eigenvalues;
        const RealVector circ =
            diagonalize_qgt(coupling_operator(model, l, gauged, -1, 0, 1, M_PI / 2.0).matrix,
                            gauged.frame_minus)
                .eigenvalues;
        const Eigen::JacobiSVD<Matrix> svd(interband_coupling(model, l, gauged, 0));

        worst = std::max(worst, (q - q_ref).cwiseAbs().maxCoeff());
        worst = std::max(worst, (circ - circ_ref).cwiseAbs().maxCoeff());
        worst = std::max(
            worst, (svd.singularValues() - svd_ref.singularValues()).cwiseAbs().maxCoeff());
    }

    Check c;
    c.pass = worst <= 1e-8;
    c.detail = "worst eigenvalue / Rabi-frequency shift over 5 re-gaugings " + fmt(worst) +
               " (<=1e-8)";
    return c;
}

// --- criterion 8: unitarity and determinism --------------------------------

Check criterion_unitarity_determinism() {
    const HamiltonianModel model = builtin_model("dirac4_generic");
    const ParameterPoint l = reference_lambda();
    const BandDecomposition bands = decompose_bands(model, l);

    DrivePulse pulse = make_pulse(bands.gap, 0, std::nullopt, 0.0, 0.02);
    const double dt = (2.0 * M_PI / pulse.omega) / 64.0;
    pulse.duration = 1e5 * dt;
    const PopulationTrace trace = evolve(model, l, pulse, Vector(bands.frame_minus.col(0)),
                                         dt, EvolveMode::full, std::nullopt, 1000);
    double drift = 0.0;
    for (double nrm : trace.norm) drift = std::max(drift, std::abs(nrm - 1.0));

    // Same config, two result files: identical apart from the run header.
    const std::string config_text =
        "{\"model\": {\"name\": \"dirac4_generic\"}, \"lambda\": [0.7, 0.3, 1.1, -0.4]}";
    const RunConfig cfg = parse_config_text(config_text);
    nlohmann::json body;
    body["q_minus"] = matrix_to_json(qgt_resolvent(model, l, -1, 0, 0).matrix);
    body["gap"] = bands.gap;

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qgtlab_acceptance";
    fs::create_directories(dir);
    auto body_of = [&](const fs::path& path) {
        write_result_file(path, cfg, body);
        std::ifstream in(path);
        std::ostringstream text;
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("# run ", 0) != 0) text << line << "\n";
        return text.str();
    };
    const bool identical = body_of(dir / "a.json") == body_of(dir / "b.json");

    Check c;
    c.pass = drift <= 1e-8 && identical;
    c.detail = "norm drift " + fmt(drift) + " (<=1e-8) over 1e5 steps, bodies " +
               (identical ? "identical" : "DIFFER");
    return c;
}

// --- criterion 9: RWA breakdown diagnostic ---------------------------------

Check criterion_rwa_breakdown() {
    const HamiltonianModel model = builtin_model("weyl4");

    // Broken regime: tiny gap, drive far above it (gap < omega / 5).
    ParameterPoint small(4);
    small << 0.1, 0.05, 0.08, 0.06;
    const BandDecomposition broken_bands = decompose_bands(model, small);
    DrivePulse broken_pulse =
        make_pulse(6.0 * broken_bands.gap, 0, std::nullopt, 0.0, 0.12 * broken_bands.gap);
    const auto broken = rwa_validity(model, {small}, broken_pulse);
    const double visibility = broken.at(0).peak_visibility;
    const bool regime_ok = broken_bands.gap < broken_pulse.omega / 5.0;

    // Healthy regime: the standard Rabi-law and decoupling criteria hold.
    ParameterPoint healthy(4);
    healthy << 1.2, 0.8, 0.6, 0.3;
    const double err_rwa = spectroscopy_worst_error(model, healthy, EvolveMode::rwa);
    const double err_full = spectroscopy_worst_error(model, healthy, EvolveMode::full);
    const double leak_rwa = worst_foreign_population(model, healthy, EvolveMode::rwa);
    const double leak_full = worst_foreign_population(model, healthy, EvolveMode::full);

    Check c;
    c.pass = regime_ok && visibility < 3.0 && err_rwa < 0.01 && err_full < 0.03 &&
             leak_rwa <= 1e-8 && leak_full <= 1e-3;
    c.detail = "broken visibility " + fmt(visibility) + " (<3); healthy q errors " +
               fmt(err_rwa) + "/" + fmt(err_full) + ", leakage " + fmt(leak_rwa) + "/" +
               fmt(leak_full);
    return c;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria = {
        {"preparation fidelities 97.3% / 99.2%", criterion_preparation_fidelity},
        {"Rabi frequency law Omega = A sqrt(q)", criterion_rabi_law},
        {"oracle equivalence and spin_half closed forms", criterion_oracles},
        {"two-tone identities and metric/curvature extraction", criterion_two_tone},
        {"Landau-Zener transition law", criterion_lz},
        {"Morris-Shore decoupling", criterion_morris_shore},
        {"gauge invariance", criterion_gauge},
        {"unitarity and determinism", criterion_unitarity_determinism},
        {"RWA breakdown diagnostic", criterion_rwa_breakdown},
    };

    bool all_pass = true;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Check check;
        try {
            check = criteria[i].run();
        } catch (const std::exception& e) {
            check.pass = false;
            check.detail = std::string("exception: ") + e.what();
        }
        all_pass = all_pass && check.pass;
        std::printf("criterion %zu [%s] %s — %s\n", i + 1, check.pass ? "PASS" : "FAIL",
                    criteria[i].name, check.detail.c_str());
        std::fflush(stdout);
    }
    std::printf(all_pass ? "acceptance: all criteria pass\n"
                         : "acceptance: FAILURES above\n");
    return all_pass ? 0 : 1;
}
