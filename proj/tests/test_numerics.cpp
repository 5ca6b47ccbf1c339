#include <doctest.h>

#include <random>

#include "qgt/numerics.hpp"

using namespace qgt;

namespace {

Matrix random_hermitian(Eigen::Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Matrix a(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) a(r, c) = Complex(g(rng), g(rng));
    return (a + a.adjoint()) / 2.0;
}

} // namespace

TEST_CASE("HermitianMatrix rejects asymmetric input") {
    Matrix bad(2, 2);
    bad << 1.0, Complex(0.0, 1.0), Complex(0.0, 1.0), 2.0;  // anti-Hermitian off-diag
    CHECK_THROWS_AS((void)HermitianMatrix{bad}, NotHermitian);

    Matrix ok(2, 2);
    ok << 1.0, Complex(0.0, 1.0), Complex(0.0, -1.0), 2.0;
    CHECK_NOTHROW((void)HermitianMatrix{ok});
}

TEST_CASE("hermitian_eig on diagonal and Pauli-x inputs") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    const EigenSystem e1 = hermitian_eig(HermitianMatrix(d));
    CHECK(e1.values(0) == doctest::Approx(1.0));
    CHECK(e1.values(1) == doctest::Approx(2.0));
    CHECK((e1.vectors.cwiseAbs() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

    Matrix sx = Matrix::Zero(2, 2);
    sx(0, 1) = 1.0;
    sx(1, 0) = 1.0;
    const EigenSystem e2 = hermitian_eig(HermitianMatrix(sx));
    CHECK(e2.values(0) == doctest::Approx(-1.0));
    CHECK(e2.values(1) == doctest::Approx(+1.0));
}

TEST_CASE("hermitian_eig residual / orthonormality on random matrices") {
    std::mt19937_64 rng(101);
    for (Eigen::Index d : {2, 4, 8, 16}) {
        for (int rep = 0; rep < 25; ++rep) {
            const Matrix h = random_hermitian(d, rng);
            const EigenSystem e = hermitian_eig(HermitianMatrix(h));
            const double scale = h.cwiseAbs().maxCoeff();
            CHECK((e.vectors.adjoint() * e.vectors - Matrix::Identity(d, d))
                      .cwiseAbs()
                      .maxCoeff() < 1e-10);
            CHECK((h * e.vectors - e.vectors * e.values.asDiagonal().toDenseMatrix().cast<Complex>())
                      .cwiseAbs()
                      .maxCoeff() < 1e-9 * scale);
            for (Eigen::Index i = 1; i < d; ++i) CHECK(e.values(i) >= e.values(i - 1));
        }
    }
}

TEST_CASE("hermitian_eig is deterministic on degenerate input") {
    // Block with an exactly twofold level.
    Matrix h = Matrix::Zero(4, 4);
    h(0, 0) = h(1, 1) = 1.0;
    h(2, 2) = 2.0;
    h(3, 3) = 3.0;
    h(0, 1) = Complex(0.3, 0.1);
    h(1, 0) = std::conj(h(0, 1));
    const Matrix u = hermitian_eig(HermitianMatrix(h)).vectors;
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix v = hermitian_eig(HermitianMatrix(h)).vectors;
        CHECK((u - v).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("propagate_step basics") {
    Vector psi(2);
    psi << Complex(0.6, 0.0), Complex(0.0, 0.8);

    SUBCASE("zero generator is the identity") {
        const Vector out = propagate_step(HermitianMatrix(Matrix::Zero(2, 2)), psi, 0.7);
        CHECK((out - psi).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("stationary state picks up exp(-i E t)") {
        Matrix d = Matrix::Zero(2, 2);
        d(0, 0) = 1.5;
        d(1, 1) = -0.5;
        Vector basis = Vector::Zero(2);
        basis(1) = 1.0;
        const Vector out = propagate_step(HermitianMatrix(d), basis, 0.3);
        CHECK(std::abs(out(1) - std::exp(Complex(0.0, 0.5 * 0.3))) < 1e-13);
        CHECK(std::abs(out(0)) < 1e-15);
    }
    SUBCASE("two-level resonant quarter period transfers half the population") {
        const double omega_rabi = 0.37;
        Matrix h = Matrix::Zero(2, 2);
        h(0, 1) = omega_rabi;
        h(1, 0) = omega_rabi;
        Vector ground = Vector::Zero(2);
        ground(0) = 1.0;
        const Vector out =
            propagate_step(HermitianMatrix(h), ground, M_PI / (4.0 * omega_rabi));
        CHECK(std::abs(std::norm(out(1)) - 0.5) < 1e-10);
    }
}

TEST_CASE("propagate_step unitarity and composition") {
    std::mt19937_64 rng(77);
    const Matrix h = random_hermitian(6, rng);
    const HermitianMatrix hm(h);
    std::normal_distribution<double> g;
    Vector a(6), b(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
        a(i) = Complex(g(rng), g(rng));
        b(i) = Complex(g(rng), g(rng));
    }
    a.normalize();
    b.normalize();
    const Complex overlap = a.dot(b);

    Vector pa = a, pb = b;
    for (int s = 0; s < 200; ++s) {
        pa = propagate_step(hm, pa, 0.05);
        pb = propagate_step(hm, pb, 0.05);
        CHECK(std::abs(pa.norm() - 1.0) < 1e-12);
    }
    CHECK(std::abs(pa.dot(pb) - overlap) < 1e-10);

    // n steps of dt == one step of n dt for frozen H.
    const Vector one = propagate_step(hm, a, 200 * 0.05);
    CHECK((pa - one).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("dominant_frequencies on synthetic tones") {
    SUBCASE("single tone within 0.1%") {
        const double omega = 2.31;
        const int n = 4096;
        const double dt = 40.0 * (2.0 * M_PI / omega) / n;
        std::vector<double> trace(n);
        for (int i = 0; i < n; ++i) trace[i] = std::cos(omega * i * dt);
        const auto peaks = dominant_frequencies(trace, dt, 3);
        REQUIRE(peaks.size() >= 1);
        CHECK(std::abs(peaks[0].frequency - omega) / omega < 1e-3);
        CHECK(peaks[0].amplitude == doctest::Approx(1.0).epsilon(0.05));
        CHECK(peaks[0].resolution == doctest::Approx(2.0 * M_PI / (n * dt)));
    }
    SUBCASE("single tone within a tenth of a bin at >= 20 periods") {
        const double omega = 1.0;
        const int n = 2048;
        const double dt = 23.7 * (2.0 * M_PI / omega) / n;  // non-integer cycle count
        std::vector<double> trace(n);
        for (int i = 0; i < n; ++i) trace[i] = std::cos(omega * i * dt + 0.4);
        const auto peaks = dominant_frequencies(trace, dt, 1);
        REQUIRE(peaks.size() == 1);
        const double bin = 2.0 * M_PI / (n * dt);
        CHECK(std::abs(peaks[0].frequency - omega) < 0.1 * bin);
    }
    SUBCASE("two tones at ratio pi within 0.2%") {
        const double omega1 = 0.9;
        const double omega2 = M_PI * omega1;
        const int n = 8192;
        const double dt = 60.0 * (2.0 * M_PI / omega1) / n;
        std::vector<double> trace(n);
        for (int i = 0; i < n; ++i)
            trace[i] = std::cos(omega1 * i * dt) + std::cos(omega2 * i * dt);
        const auto peaks = dominant_frequencies(trace, dt, 2);
        REQUIRE(peaks.size() == 2);
        std::vector<double> freqs = {peaks[0].frequency, peaks[1].frequency};
        std::sort(freqs.begin(), freqs.end());
        CHECK(std::abs(freqs[0] - omega1) / omega1 < 2e-3);
        CHECK(std::abs(freqs[1] - omega2) / omega2 < 2e-3);
    }
    SUBCASE("constant trace yields no peaks") {
        std::vector<double> flat(512, 0.7);
        CHECK(dominant_frequencies(flat, 0.1, 4).empty());
    }
    SUBCASE("short trace rejected") {
        std::vector<double> tiny(15, 0.0);
        CHECK_THROWS_AS(dominant_frequencies(tiny, 0.1, 2), TooShort);
    }
}

TEST_CASE("polar_unitary and frame helpers") {
    std::mt19937_64 rng(5);
    const Matrix h = random_hermitian(4, rng);
    const EigenSystem e = hermitian_eig(HermitianMatrix(h));
    const Matrix u = polar_unitary(e.vectors * 0.7);
    CHECK((u.adjoint() * u - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(polar_unitary(Matrix::Zero(3, 3)), AlignmentSingular);

    Matrix cols(4, 2);
    cols.setZero();
    cols(1, 0) = 1.0;
    cols(2, 1) = Complex(0.0, 1.0);
    const Matrix frame = pivoted_orthonormal_frame(cols);
    CHECK((frame.adjoint() * frame - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}
