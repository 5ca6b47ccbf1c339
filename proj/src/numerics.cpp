#include "qgt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include <fftw3.h>

namespace qgt {

HermitianMatrix::HermitianMatrix(Matrix m) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw InvalidSetting("HermitianMatrix: matrix must be square and non-empty");
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(scale, 1e-300))
        throw NotHermitian("HermitianMatrix: Hermiticity violated, max asymmetry " +
                             std::to_string(asym));
    mat_ = 0.5 * (m + m.adjoint().eval());
}

Matrix pivoted_orthonormal_frame(const Matrix& cols) {
    const Eigen::Index d = cols.rows();
    const Eigen::Index n = cols.cols();
    const Matrix proj = cols * cols.adjoint();
    Matrix frame(d, n);
    std::vector<bool> used(static_cast<size_t>(d), false);
    for (Eigen::Index c = 0; c < n; ++c) {
        // Best canonical basis vector: largest norm after projection and
        // orthogonalization against already chosen columns.
        Eigen::Index best = -1;
        double best_norm = -1.0;
        Vector best_vec;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (used[static_cast<size_t>(i)]) continue;
            Vector v = proj.col(i);
            for (Eigen::Index p = 0; p < c; ++p)
                v -= frame.col(p).dot(v) * frame.col(p);
            const double nv = v.norm();
            if (nv > best_norm + 1e-14) {
                best_norm = nv;
                best = i;
                best_vec = v;
            }
        }
        if (best < 0 || best_norm < 1e-10)
            throw NonConvergence("pivoted_orthonormal_frame: subspace projection degenerate");
        used[static_cast<size_t>(best)] = true;
        frame.col(c) = best_vec / best_norm;
    }
    return frame;
}

void fix_column_phases(Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index imax = 0;
        double amax = -1.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double a = std::abs(m(i, c));
            if (a > amax * (1.0 + 1e-9)) {
                amax = a;
                imax = i;
            }
        }
        if (amax <= 0.0) continue;
        const Complex ph = m(imax, c) / amax;
        m.col(c) *= std::conj(ph);
    }
}

Matrix polar_unitary(const Matrix& a, double min_singular) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() < min_singular)
        throw AlignmentSingular("polar_unitary: overlap matrix nearly singular");
    return svd.matrixU() * svd.matrixV().adjoint();
}

EigenSystem hermitian_eig(const HermitianMatrix& h, const std::optional<Matrix>& previous_frame) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h.mat());
    if (solver.info() != Eigen::Success)
        throw NonConvergence("hermitian_eig: eigensolver failed to converge");

    EigenSystem sys;
    sys.values = solver.eigenvalues();
    sys.vectors = solver.eigenvectors();

    const Eigen::Index d = sys.values.size();
    const double scale = std::max(sys.values.cwiseAbs().maxCoeff(), 1.0);
    const double cluster_tol = 1e-10 * scale;

    // Deterministic treatment of numerically degenerate clusters.
    Eigen::Index start = 0;
    while (start < d) {
        Eigen::Index stop = start + 1;
        while (stop < d && sys.values(stop) - sys.values(stop - 1) <= cluster_tol) ++stop;
        const Eigen::Index n = stop - start;
        if (n > 1) {
            Matrix block = sys.vectors.middleCols(start, n);
            if (previous_frame && previous_frame->rows() == d && previous_frame->cols() >= stop) {
                // Align to the caller's previous frame via the polar factor of
                // the overlap; falls back to the pivoted frame if orthogonal.
                const Matrix prev = previous_frame->middleCols(start, n);
                try {
                    const Matrix u = polar_unitary(block.adjoint() * prev);
                    block = block * u;
                } catch (const AlignmentSingular&) {
                    block = pivoted_orthonormal_frame(block);
                }
            } else {
                block = pivoted_orthonormal_frame(block);
            }
            sys.vectors.middleCols(start, n) = block;
        }
        start = stop;
    }
    fix_column_phases(sys.vectors);
    return sys;
}

Vector propagate_step(const HermitianMatrix& h_mid, const Vector& psi, double dt) {
    if (dt <= 0.0) throw InvalidSetting("propagate_step: dt must be positive");
    if (std::abs(psi.norm() - 1.0) > 1e-9)
        throw InvalidSetting("propagate_step: state not normalized");
    const EigenSystem sys = hermitian_eig(h_mid);
    const Vector coeff = sys.vectors.adjoint() * psi;
    Vector rotated(coeff.size());
    for (Eigen::Index i = 0; i < coeff.size(); ++i)
        rotated(i) = coeff(i) * std::exp(Complex(0.0, -sys.values(i) * dt));
    return sys.vectors * rotated;
}

namespace {

std::vector<double> power_spectrum(const std::vector<double>& signal) {
    static std::mutex plan_mutex;
    const int n = static_cast<int>(signal.size());
    std::vector<double> in(signal);
    std::vector<fftw_complex> out(static_cast<size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<double> mag(static_cast<size_t>(n / 2 + 1));
    for (size_t i = 0; i < mag.size(); ++i)
        mag[i] = std::hypot(out[i][0], out[i][1]);
    return mag;
}

struct WindowedSpectrum {
    std::vector<double> mag;  // raw windowed DFT magnitudes
    double window_sum = 0.0;
    double rms = 0.0;  // of the mean-subtracted trace
};

// Hann window keeps leakage from masking nearby tones and makes the
// log-quadratic bin refinement accurate to a small fraction of a bin.
WindowedSpectrum windowed_spectrum(const std::vector<double>& trace) {
    const int n = static_cast<int>(trace.size());
    const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
    std::vector<double> windowed(trace.size());
    WindowedSpectrum spec;
    for (int i = 0; i < n; ++i) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
        windowed[static_cast<size_t>(i)] = (trace[static_cast<size_t>(i)] - mean) * w;
        spec.window_sum += w;
        spec.rms += (trace[static_cast<size_t>(i)] - mean) * (trace[static_cast<size_t>(i)] - mean);
    }
    spec.rms = std::sqrt(spec.rms / n);
    spec.mag = power_spectrum(windowed);
    return spec;
}

} // namespace

std::vector<double> spectrum_magnitudes(const std::vector<double>& trace) {
    if (trace.size() < 16) throw TooShort("spectrum_magnitudes: trace length < 16");
    WindowedSpectrum spec = windowed_spectrum(trace);
    for (double& m : spec.mag) m *= 2.0 / spec.window_sum;
    return spec.mag;
}

std::vector<SpectralPeak> dominant_frequencies(const std::vector<double>& trace,
                                               double dt, int max_peaks) {
    if (trace.size() < 16) throw TooShort("dominant_frequencies: trace length < 16");
    if (dt <= 0.0) throw InvalidSetting("dominant_frequencies: dt must be positive");
    const int n = static_cast<int>(trace.size());

    const WindowedSpectrum spec = windowed_spectrum(trace);
    const double window_sum = spec.window_sum;
    const double rms = spec.rms;
    const double bin = 2.0 * M_PI / (n * dt);
    if (rms < 1e-13) return {};  // flat trace

    const std::vector<double>& mag = spec.mag;
    const int half = static_cast<int>(mag.size()) - 1;

    std::vector<double> sorted_mag(mag.begin() + 1, mag.end());
    std::sort(sorted_mag.begin(), sorted_mag.end());
    const double floor_mag = sorted_mag[sorted_mag.size() / 2];
    const double threshold = std::max(3.0 * floor_mag, 1e-12 * rms * window_sum);

    std::vector<SpectralPeak> peaks;
    for (int k = 1; k < half; ++k) {
        const double m0 = mag[static_cast<size_t>(k)];
        if (m0 <= threshold) continue;
        if (m0 <= mag[static_cast<size_t>(k - 1)] || m0 < mag[static_cast<size_t>(k + 1)]) continue;
        double delta = 0.0;
        const double ml = mag[static_cast<size_t>(k - 1)];
        const double mr = mag[static_cast<size_t>(k + 1)];
        if (ml > 1e-12 * m0 && mr > 1e-12 * m0) {
            const double a = std::log(ml);
            const double b = std::log(m0);
            const double c = std::log(mr);
            const double denom = a - 2.0 * b + c;
            if (std::abs(denom) > 1e-300) delta = 0.5 * (a - c) / denom;
            delta = std::clamp(delta, -0.5, 0.5);
        }
        SpectralPeak p;
        p.frequency = (k + delta) * bin;
        p.amplitude = 2.0 * m0 / window_sum;
        p.resolution = bin;
        peaks.push_back(p);
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const SpectralPeak& a, const SpectralPeak& b) { return a.amplitude > b.amplitude; });
    if (static_cast<int>(peaks.size()) > max_peaks) peaks.resize(static_cast<size_t>(max_peaks));
    return peaks;
}

} // namespace qgt
