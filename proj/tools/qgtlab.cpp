// qgtlab: configuration-driven front end for the QGT protocol simulator.
//
// Commands: qgt, rabi, prep, tomo, extract, lz, check-rwa, selftest.
// Exit codes: 0 ok, 2 config error, 3 physics precondition violated,
// 4 protocol failure, 5 internal invariant breach.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "qgt/result_io.hpp"
#include "qgt/sweep.hpp"

using nlohmann::json;
using namespace qgt;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;       // overrides output.directory
    long long seed = -1;       // overrides protocol.seed
    int jobs = 0;
    bool force = false;
};

struct Session {
    RunConfig cfg;
    HamiltonianModel model;
    CliOptions opts;

    std::filesystem::path out(const std::string& name) const {
        return std::filesystem::path(cfg.out_dir) / name;
    }
    bool wants(const std::string& fmt) const {
        return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
    }
};

Session open_session(const CliOptions& opts) {
    Session s;
    s.opts = opts;
    s.cfg = load_config(opts.config_path);
    if (!opts.out_dir.empty()) s.cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) s.cfg.protocol.seed = static_cast<unsigned long>(opts.seed);
    s.model = builtin_model(s.cfg.model_name, s.cfg.model_settings);
    if (s.cfg.lambda.size() != s.model.param_count)
        throw ConfigError("config: lambda has " + std::to_string(s.cfg.lambda.size()) +
                          " entries, model expects " + std::to_string(s.model.param_count));
    return s;
}

// Resolve omega = "resonant" and validate the amplitude guard up front.
DrivePulse resolved_drive(Session& s, bool need_duration = false) {
    DrivePulse drive = s.cfg.drive;
    if (s.cfg.resonant || drive.omega <= 0.0)
        drive.omega = decompose_bands(s.model, s.cfg.lambda).gap;
    if (drive.duration <= 0.0 && need_duration) {
        const PairBasis basis = pair_basis(rwa_hamiltonian(s.model, s.cfg.lambda, drive));
        double omega_min = basis.rabi(0);
        for (Eigen::Index i = 0; i < basis.rabi.size(); ++i)
            if (basis.rabi(i) > 1e-3 * basis.rabi(0)) omega_min = basis.rabi(i);
        if (omega_min <= 0.0) throw NoPeaks("drive couples to nothing at this lambda");
        drive.duration = 100.0 * M_PI / omega_min;
    }
    DrivePulse check = drive;
    if (check.duration <= 0.0) check.duration = 1.0;  // duration resolved downstream
    check.validate(s.opts.force);
    return drive;
}

json peaks_to_json(const RabiSpectrum& spec) {
    json arr = json::array();
    for (const SpectralPeak& p : spec.peaks)
        arr.push_back({{"frequency", p.frequency},
                       {"amplitude", p.amplitude},
                       {"resolution", p.resolution}});
    return arr;
}

json record_to_json(const MeasurementRecord& rec) {
    return {{"outcome", rec.outcome},
            {"p_minus", rec.p_minus},
            {"p_plus", rec.p_plus},
            {"post_state", matrix_to_json(rec.post_state)},
            {"rng", rec.rng_tag}};
}

json plan_to_json(const PreparationPlan& plan) {
    return {{"duration", plan.duration},
            {"even_n", plan.even_n},
            {"odd_m", plan.odd_m},
            {"partition", plan.partition},
            {"omegas", real_vector_to_json(plan.omegas)},
            {"predicted_fidelity", plan.predicted_fidelity},
            {"branch_probability", plan.branch_probability}};
}

int cmd_qgt(Session& s) {
    const Eigen::Index j = s.cfg.drive.j;
    const Eigen::Index k = s.cfg.drive.k.value_or(j);
    const BandDecomposition bands = decompose_bands(s.model, s.cfg.lambda);

    json body;
    body["command"] = "qgt";
    body["gap"] = bands.gap;
    body["energy_minus"] = bands.energy_minus;
    body["energy_plus"] = bands.energy_plus;

    double worst_fd = 0.0;
    for (int sign : {-1, +1}) {
        const QGTensor q = qgt_resolvent(s.model, s.cfg.lambda, bands, sign, j, k);
        const QGTensor q_fd = qgt_fd(s.model, s.cfg.lambda, bands, sign, j, k);
        const double scale = std::max(q.matrix.cwiseAbs().maxCoeff(), 1e-300);
        worst_fd = std::max(worst_fd, (q.matrix - q_fd.matrix).cwiseAbs().maxCoeff() / scale);

        const std::string tag = sign < 0 ? "minus" : "plus";
        body["Q_" + tag] = matrix_to_json(q.matrix);
        body["metric_" + tag] = matrix_to_json(metric(q));
        body["curvature_" + tag] = matrix_to_json(curvature(q));
        const QGTensor qjj = qgt_resolvent(s.model, s.cfg.lambda, bands, sign, j, j);
        const QGTEigenbasis basis = diagonalize_qgt(qjj, bands.frame(sign));
        body["q_jj_eigenvalues_" + tag] = real_vector_to_json(basis.eigenvalues);
    }
    body["oracle_fd_relative_deviation"] = worst_fd;
    const ConsistencyReport report = factorized_consistency(s.model, s.cfg.lambda, j);
    body["factorized_consistency"] = {{"max_deviation", report.max_deviation},
                                      {"pass", report.pass},
                                      {"eigenvalues_minus", real_vector_to_json(report.eigenvalues_minus)},
                                      {"eigenvalues_plus", real_vector_to_json(report.eigenvalues_plus)}};

    write_result_file(s.out("qgt_result.json"), s.cfg, body);
    std::cout << "qgt: gap " << bands.gap << ", oracle deviation " << worst_fd << "\n";
    return 0;
}

int cmd_rabi(Session& s) {
    const DrivePulse drive = resolved_drive(s, true);
    const RabiSpectrum spec =
        rabi_spectroscopy(s.model, s.cfg.lambda, s.cfg.protocol.band, drive, std::nullopt,
                          s.cfg.sim.mode, s.cfg.sim.record_len);

    // Ground truth from the coupling eigenvalues.
    const BandDecomposition bands = decompose_bands(s.model, s.cfg.lambda);
    const CouplingOperator op =
        drive.two_tone() ? coupling_operator(s.model, s.cfg.lambda, bands, s.cfg.protocol.band,
                                             drive.j, *drive.k, drive.phase)
                         : coupling_operator_single(s.model, s.cfg.lambda, bands,
                                                    s.cfg.protocol.band, drive.j);
    const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame(s.cfg.protocol.band));

    json body;
    body["command"] = "rabi";
    body["basis"] = spec.basis_tag;
    body["peaks"] = peaks_to_json(spec);
    body["inferred_q"] = spec.inferred_q;
    body["truth_q"] = real_vector_to_json(basis.eigenvalues);
    write_result_file(s.out("rabi_result.json"), s.cfg, body);

    if (s.wants("tsv")) {
        const Eigen::Index n = bands.degeneracy();
        Vector psi0;
        std::optional<Matrix> frame;
        if (s.cfg.sim.mode == EvolveMode::rwa) {
            psi0 = Vector::Zero(2 * n);
            psi0.head(n).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
            frame = Matrix::Identity(2 * n, 2 * n);
        } else {
            psi0 = bands.frame_minus * Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
            Matrix f(s.model.dim, 2 * n);
            f << bands.frame_minus, bands.frame_plus;
            frame = f;
        }
        const double dt = (2.0 * M_PI / drive.omega) / s.cfg.sim.dt_divisor;
        const long steps = std::max(1L, std::lround(drive.duration / dt));
        const int stride =
            static_cast<int>(std::max(1L, steps / std::max(s.cfg.sim.record_len, 16)));
        write_trace_file(s.out("rabi_trace.tsv"),
                         evolve(s.model, s.cfg.lambda, drive, psi0, dt, s.cfg.sim.mode, frame,
                                stride));
    }
    std::cout << "rabi: " << spec.peaks.size() << " peaks, inferred q:";
    for (double q : spec.inferred_q) std::cout << ' ' << q;
    std::cout << "\n";
    return 0;
}

int cmd_prep(Session& s) {
    DrivePulse drive = resolved_drive(s);
    const RWASystem sys = rwa_hamiltonian(s.model, s.cfg.lambda, drive);
    const PairBasis basis = pair_basis(sys);
    const Eigen::Index n = basis.rabi.size();

    std::vector<int> partition = s.cfg.protocol.partition;
    if (partition.empty()) {
        partition.assign(static_cast<size_t>(n), 1);
        partition[0] = 0;
    }
    if (static_cast<Eigen::Index>(partition.size()) != n)
        throw ConfigError("config: protocol.partition must have N entries");
    const double t_max =
        s.cfg.protocol.t_max > 0.0 ? s.cfg.protocol.t_max : 40.0 * M_PI / basis.rabi(n - 1);
    const PreparationPlan plan = plan_preparation(basis.rabi, partition, t_max);

    // The plan is announced before the run.
    std::cout << "prep plan: T = " << plan.duration << ", even n = [";
    for (size_t i = 0; i < plan.even_n.size(); ++i)
        std::cout << (i ? " " : "") << plan.even_n[i];
    std::cout << "], odd m = [";
    for (size_t i = 0; i < plan.odd_m.size(); ++i) std::cout << (i ? " " : "") << plan.odd_m[i];
    std::cout << "], predicted fidelity = " << plan.predicted_fidelity << "\n";

    const Vector psi0 = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    const PreparationOutcome outcome =
        prepare_eigenstate(s.model, s.cfg.lambda, drive, psi0, plan,
                           s.cfg.protocol.measure_mode, s.cfg.protocol.seed);

    json body;
    body["command"] = "prep";
    body["rabi_frequencies"] = real_vector_to_json(basis.rabi);
    body["plan"] = plan_to_json(plan);
    body["fidelity"] = outcome.fidelity;
    body["records"] = json::array();
    for (const MeasurementRecord& rec : outcome.records)
        body["records"].push_back(record_to_json(rec));
    write_result_file(s.out("prep_result.json"), s.cfg, body);
    std::cout << "prep: simulated fidelity " << outcome.fidelity << "\n";
    return 0;
}

int cmd_tomo(Session& s) {
    const DrivePulse two_tone = resolved_drive(s);
    if (!two_tone.two_tone()) throw ConfigError("config: tomo needs a two-tone drive (j and k)");
    DrivePulse single = two_tone;
    single.k.reset();

    double t_max = s.cfg.protocol.t_max;
    if (t_max <= 0.0) {
        const PairBasis basis = pair_basis(rwa_hamiltonian(s.model, s.cfg.lambda, two_tone));
        t_max = 80.0 * M_PI / basis.rabi(basis.rabi.size() - 1);
    }
    const MixingTransform tomo =
        tomography_mixing(s.model, s.cfg.lambda, single, two_tone, s.cfg.protocol.band,
                          s.cfg.protocol.measure_mode, t_max, s.cfg.protocol.shots,
                          s.cfg.protocol.seed);

    json body;
    body["command"] = "tomo";
    body["band"] = tomo.band;
    body["entries"] = matrix_to_json(tomo.entries);
    body["ground_truth"] = matrix_to_json(tomo.ground_truth);
    body["plan"] = plan_to_json(tomo.plan);
    write_result_file(s.out("tomo_result.json"), s.cfg, body);
    std::cout << "tomo: |a| matrix written, plan T = " << tomo.plan.duration << "\n";
    return 0;
}

int cmd_extract(Session& s) {
    if (!s.cfg.drive.k) throw ConfigError("config: extract needs drive.j and drive.k");
    const ExtractionResult result = extract_metric_curvature(
        s.model, s.cfg.lambda, s.cfg.drive.j, *s.cfg.drive.k, s.cfg.drive.amplitude,
        s.cfg.protocol.measure_mode, s.cfg.protocol.t_max, s.cfg.protocol.shots,
        s.cfg.protocol.seed);

    json body;
    body["command"] = "extract";
    body["metric_est"] = matrix_to_json(result.metric_est);
    body["metric_truth"] = matrix_to_json(result.metric_truth);
    body["metric_error"] = result.metric_error;
    body["curvature_est"] = matrix_to_json(result.curvature_est);
    body["curvature_truth"] = matrix_to_json(result.curvature_truth);
    body["curvature_error"] = result.curvature_error;
    body["q_single_j"] = real_vector_to_json(result.q_single_j);
    body["q_single_k"] = real_vector_to_json(result.q_single_k);
    write_result_file(s.out("extract_result.json"), s.cfg, body);
    std::cout << "extract: metric error " << result.metric_error << ", curvature error "
              << result.curvature_error << "\n";
    return 0;
}

int cmd_lz(Session& s) {
    if (s.cfg.lz.alphas.empty()) throw ConfigError("config: lz.alphas required");
    const DrivePulse drive = resolved_drive(s);

    std::vector<double> alphas = s.cfg.lz.alphas;
    if (s.cfg.lz.alpha_relative) {
        const BandDecomposition bands = decompose_bands(s.model, s.cfg.lambda);
        const CouplingOperator op =
            drive.two_tone() ? coupling_operator(s.model, s.cfg.lambda, bands, -1, drive.j,
                                                 *drive.k, drive.phase)
                             : coupling_operator_single(s.model, s.cfg.lambda, bands, -1, drive.j);
        const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
        if (s.cfg.protocol.state_index < 0 ||
            s.cfg.protocol.state_index >= basis.eigenvalues.size())
            throw ConfigError("config: protocol.state_index out of range");
        const double v_sq = drive.amplitude * drive.amplitude *
                            basis.eigenvalues(s.cfg.protocol.state_index);
        for (double& a : alphas) a *= v_sq;
    }

    const LZExtraction fit =
        lz_extraction(s.model, s.cfg.lambda, drive, alphas, s.cfg.protocol.state_index,
                      s.cfg.lz.window_factor, s.opts.jobs);

    json body;
    body["command"] = "lz";
    body["q_fit"] = fit.q_fit;
    body["q_truth"] = fit.q_truth;
    body["residual"] = fit.residual;
    body["alphas"] = fit.alphas;
    body["transfer"] = fit.transfer;
    write_result_file(s.out("lz_result.json"), s.cfg, body);
    std::cout << "lz: fitted q " << fit.q_fit << " (truth " << fit.q_truth << "), residual "
              << fit.residual << "\n";
    return 0;
}

int cmd_check_rwa(Session& s) {
    const DrivePulse drive = resolved_drive(s, true);
    const std::vector<ParameterPoint> path = {s.cfg.lambda};
    const std::vector<RWAValidityPoint> report = rwa_validity(s.model, path, drive);

    json body;
    body["command"] = "check-rwa";
    body["points"] = json::array();
    for (const RWAValidityPoint& p : report) {
        json lambda = json::array();
        for (Eigen::Index i = 0; i < p.lambda.size(); ++i) lambda.push_back(p.lambda(i));
        body["points"].push_back({{"lambda", lambda},
                                  {"gap", p.gap},
                                  {"discrepancy", p.discrepancy},
                                  {"peak_visibility", p.peak_visibility},
                                  {"flagged", p.flagged}});
    }
    write_result_file(s.out("check_rwa_result.json"), s.cfg, body);
    for (const RWAValidityPoint& p : report)
        std::cout << "check-rwa: gap " << p.gap << ", discrepancy " << p.discrepancy
                  << ", visibility " << p.peak_visibility << (p.flagged ? "  [FLAGGED]" : "")
                  << "\n";
    return 0;
}

// --- selftest ----------------------------------------------------------------

struct SelftestCase {
    std::string name;
    bool pass = false;
    double value = 0.0;   // measured deviation
    double bound = 0.0;
};

int cmd_selftest() {
    // QGTLAB_SELFTEST_PERTURB injects a wrong tolerance to prove the suite
    // can fail with a named invariant.
    const bool perturb = std::getenv("QGTLAB_SELFTEST_PERTURB") != nullptr;
    std::vector<SelftestCase> cases;
    auto check = [&](const std::string& name, double value, double bound) {
        cases.push_back({name, value <= bound, value, bound});
    };

    const HamiltonianModel spin = builtin_model("spin_half");
    ParameterPoint sphere(2);
    sphere << 1.1, 0.4;  // theta, phi
    {
        const double q_tt = qgt_resolvent(spin, sphere, -1, 0, 0).matrix(0, 0).real();
        const double q_pp = qgt_resolvent(spin, sphere, -1, 1, 1).matrix(0, 0).real();
        const QGTensor q_tp = qgt_resolvent(spin, sphere, -1, 0, 1);
        const double f_tp = curvature(q_tp)(0, 0).real();
        const double sin_t = std::sin(sphere(0));
        const double bound = perturb ? 1e-18 : 1e-12;
        check("spin_half_Q_theta_theta", std::abs(q_tt - 0.25), bound);
        check("spin_half_Q_phi_phi", std::abs(q_pp - sin_t * sin_t / 4.0), 1e-12);
        check("spin_half_F_theta_phi", std::abs(f_tp - sin_t / 2.0), 1e-12);
    }

    const HamiltonianModel dirac = builtin_model("dirac4_generic");
    ParameterPoint ref(4);
    ref << 0.7, 0.3, 1.1, -0.4;
    {
        const QGTensor q = qgt_resolvent(dirac, ref, -1, 0, 1);
        const QGTensor q_fd = qgt_fd(dirac, ref, -1, 0, 1);
        const double scale = q.matrix.cwiseAbs().maxCoeff();
        check("resolvent_vs_fd", (q.matrix - q_fd.matrix).cwiseAbs().maxCoeff() / scale, 1e-5);

        const BandDecomposition bands = decompose_bands(dirac, ref);
        const Matrix qjj = qgt_resolvent(dirac, ref, bands, -1, 0, 0).matrix;
        const Matrix qkk = qgt_resolvent(dirac, ref, bands, -1, 1, 1).matrix;
        const Matrix circ = coupling_operator(dirac, ref, bands, -1, 0, 1, M_PI / 2.0).matrix;
        const Matrix lin = coupling_operator(dirac, ref, bands, -1, 0, 1, 0.0).matrix;
        const Matrix f = curvature(q);
        const Matrix g = metric(q);
        check("two_tone_circular_identity", (circ - qjj - qkk - (-1.0) * f).cwiseAbs().maxCoeff(),
              1e-12);
        check("two_tone_linear_identity", (lin - qjj - qkk - 2.0 * g).cwiseAbs().maxCoeff(),
              1e-12);
        const ConsistencyReport rep = factorized_consistency(dirac, ref, 0);
        check("factorized_consistency", rep.pass ? 0.0 : 1.0, 0.5);
    }

    {
        // Two-level resonant transfer: P+ = 1/2 at the eighth Rabi period.
        DrivePulse pulse;
        pulse.j = 0;
        pulse.amplitude = 0.02;
        ParameterPoint pole(2);
        pole << M_PI / 4.0, 0.3;
        const BandDecomposition bands = decompose_bands(spin, pole);
        pulse.omega = bands.gap;
        const CouplingOperator op = coupling_operator_single(spin, pole, bands, -1, 0);
        const QGTEigenbasis basis = diagonalize_qgt(op.matrix, bands.frame_minus);
        const double omega_rabi = pulse.amplitude * std::sqrt(basis.eigenvalues(0));
        pulse.duration = M_PI / (4.0 * omega_rabi);
        Vector psi0 = Vector::Zero(2);
        psi0(0) = 1.0;
        const double dt = (2.0 * M_PI / pulse.omega) / 64.0;
        const PopulationTrace trace =
            evolve(spin, pole, pulse, psi0, dt, EvolveMode::rwa, std::nullopt, 1 << 30);
        check("resonant_quarter_period_transfer", std::abs(trace.pop_plus.back() - 0.5), 1e-6);

        double drift = 0.0;
        Vector psi = psi0;
        const HermitianMatrix h = rwa_hamiltonian(spin, pole, pulse).hamiltonian;
        for (int i = 0; i < 10000; ++i) psi = propagate_step(h, psi, dt);
        drift = std::abs(psi.norm() - 1.0);
        check("norm_drift_1e4_steps", drift, 1e-10);
    }

    {
        RealVector omegas(2);
        omegas << 1.0, M_PI;
        const PreparationPlan plan = plan_preparation(omegas, {0, 1}, 3.5 * M_PI);
        check("commensuration_fidelity_n3", std::abs(plan.predicted_fidelity - 0.9723585), 1e-4);
    }

    {
        json a = {{"x", 0.1234567890123456789}, {"y", json::array({1.0, 2.5e-300})}};
        check("serialization_determinism", dump_json17(a) == dump_json17(a) ? 0.0 : 1.0, 0.5);
    }

    bool all_pass = true;
    std::string table;
    for (const SelftestCase& c : cases) {
        all_pass = all_pass && c.pass;
        char line[160];
        std::snprintf(line, sizeof line, "%-34s %-4s  (%.3e <= %.0e)\n", c.name.c_str(),
                      c.pass ? "PASS" : "FAIL", c.value, c.bound);
        table += line;
    }
    std::cout << table;
    std::cout << "report hash: " << content_hash(table) << "\n";
    std::cout << (all_pass ? "selftest: all invariants hold\n" : "selftest: FAILURES above\n");
    return all_pass ? 0 : 5;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnknownModel*>(&e) ||
        dynamic_cast<const IndexOutOfRange*>(&e))
        return 2;
    if (dynamic_cast<const GapCollapse*>(&e) || dynamic_cast<const NotTwoBand*>(&e) ||
        dynamic_cast<const PulseRejected*>(&e) || dynamic_cast<const AsymptoticViolation*>(&e) ||
        dynamic_cast<const StepTooLarge*>(&e) ||
        dynamic_cast<const DetunedNotClosedForm*>(&e) ||
        dynamic_cast<const InvalidSetting*>(&e))
        return 3;
    if (dynamic_cast<const NoPlan*>(&e) || dynamic_cast<const FitPoor*>(&e) ||
        dynamic_cast<const NoPeaks*>(&e) || dynamic_cast<const PlanMismatch*>(&e) ||
        dynamic_cast<const DegenerateRabi*>(&e) ||
        dynamic_cast<const InconsistentBases*>(&e) || dynamic_cast<const TooShort*>(&e) ||
        dynamic_cast<const NonConvergence*>(&e))
        return 4;
    return 5;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qgtlab: quantum geometric tensor protocol simulator"};
    app.require_subcommand(1);
    app.fallthrough();  // accept global flags after the subcommand name

    CliOptions opts;
    app.add_option("--config", opts.config_path, "Run configuration file (JSON)");
    app.add_option("--out", opts.out_dir, "Output directory override");
    app.add_option("--seed", opts.seed, "RNG seed override");
    app.add_option("--jobs", opts.jobs, "Sweep parallelism bound");
    app.add_flag("--force", opts.force, "Override the A/omega amplitude guard");

    int (*handler)(Session&) = nullptr;
    bool selftest = false;
    app.add_subcommand("qgt", "Compute QGT, metric, curvature and oracle comparison")
        ->callback([&] { handler = cmd_qgt; });
    app.add_subcommand("rabi", "Rabi spectroscopy of the QGT eigenvalues")
        ->callback([&] { handler = cmd_rabi; });
    app.add_subcommand("prep", "Commensuration-pulse eigenstate preparation")
        ->callback([&] { handler = cmd_prep; });
    app.add_subcommand("tomo", "Band-mixing tomography (N = 2)")
        ->callback([&] { handler = cmd_tomo; });
    app.add_subcommand("extract", "Metric / curvature extraction pipeline")
        ->callback([&] { handler = cmd_extract; });
    app.add_subcommand("lz", "Landau-Zener transition sweep and linear-law fit")
        ->callback([&] { handler = cmd_lz; });
    app.add_subcommand("check-rwa", "RWA validity diagnostic at the working point")
        ->callback([&] { handler = cmd_check_rwa; });
    app.add_subcommand("selftest", "Fast invariant suite")->callback([&] { selftest = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (selftest) return cmd_selftest();
        if (opts.config_path.empty()) throw ConfigError("config: --config <path> is required");
        Session session = open_session(opts);
        return handler(session);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
