#include "qgt/models.hpp"

#include <cmath>
#include <random>

namespace qgt {

namespace {

Matrix kron2(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix pauli(int i) {
    Matrix s(2, 2);
    switch (i) {
        case 0: s << 1, 0, 0, 1; break;
        case 1: s << 0, 1, 1, 0; break;
        case 2: s << 0, Complex(0, -1), Complex(0, 1), 0; break;
        default: s << 1, 0, 0, -1; break;
    }
    return s;
}

double get_double(const ModelSettings& settings, const std::string& key, double fallback) {
    auto it = settings.find(key);
    if (it == settings.end()) return fallback;
    if (const double* d = std::get_if<double>(&it->second)) return *d;
    if (const long* l = std::get_if<long>(&it->second)) return static_cast<double>(*l);
    throw InvalidSetting("setting '" + key + "' must be a number");
}

long get_long(const ModelSettings& settings, const std::string& key, long fallback) {
    auto it = settings.find(key);
    if (it == settings.end()) return fallback;
    if (const long* l = std::get_if<long>(&it->second)) return *l;
    if (const double* d = std::get_if<double>(&it->second)) {
        if (*d == std::floor(*d)) return static_cast<long>(*d);
    }
    throw InvalidSetting("setting '" + key + "' must be an integer");
}

void check_keys(const ModelSettings& settings, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : settings) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw InvalidSetting("unknown model setting '" + key + "'");
    }
}

void check_lambda(const ParameterPoint& lambda, Eigen::Index m) {
    if (lambda.size() != m)
        throw InvalidSetting("parameter point has wrong dimension");
    if (!lambda.allFinite())
        throw InvalidSetting("parameter point has non-finite entries");
}

HamiltonianModel make_gamma_model(std::string name, const Eigen::MatrixXd& c,
                                  const Eigen::MatrixXd& e) {
    if (c.rows() != 5 || e.rows() != 5 || c.cols() != e.cols() || c.cols() < 1)
        throw InvalidSetting("gamma-model coefficient tables must be 5 x M");
    const Eigen::Index m = c.cols();
    HamiltonianModel model;
    model.name = std::move(name);
    model.dim = 4;
    model.param_count = m;
    model.degeneracy = 2;
    model.evaluate = [c, e, m](const ParameterPoint& lambda) {
        check_lambda(lambda, m);
        Matrix h = Matrix::Zero(4, 4);
        for (int a = 0; a < 5; ++a) {
            double d = 0.0;
            for (Eigen::Index i = 0; i < m; ++i)
                d += c(a, i) * std::sin(lambda(i)) + e(a, i) * std::cos(lambda(i));
            h += d * dirac_gammas()[static_cast<size_t>(a)];
        }
        return HermitianMatrix(h);
    };
    model.analytic_gradient = [c, e, m](const ParameterPoint& lambda, Eigen::Index j) {
        check_lambda(lambda, m);
        if (j < 0 || j >= m) throw IndexOutOfRange("gradient index out of range");
        Matrix h = Matrix::Zero(4, 4);
        for (int a = 0; a < 5; ++a) {
            const double dd = c(a, j) * std::cos(lambda(j)) - e(a, j) * std::sin(lambda(j));
            h += dd * dirac_gammas()[static_cast<size_t>(a)];
        }
        return HermitianMatrix(h);
    };
    return model;
}

// dirac4 as coefficient tables: d_a = sin(lambda_a) for a<4, d_5 = sum cos.
// The constant mass term is added by the evaluate wrapper.
void dirac4_tables(Eigen::MatrixXd& c, Eigen::MatrixXd& e) {
    c = Eigen::MatrixXd::Zero(5, 4);
    e = Eigen::MatrixXd::Zero(5, 4);
    for (int i = 0; i < 4; ++i) {
        c(i, i) = 1.0;
        e(4, i) = 1.0;
    }
}

} // namespace

const std::array<Matrix, 5>& dirac_gammas() {
    static const std::array<Matrix, 5> gammas = {
        kron2(pauli(1), pauli(1)), kron2(pauli(1), pauli(2)), kron2(pauli(1), pauli(3)),
        kron2(pauli(2), pauli(0)), kron2(pauli(3), pauli(0))};
    return gammas;
}

void dirac4_generic_coefficients(unsigned long seed, Eigen::MatrixXd& c, Eigen::MatrixXd& e) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    c.resize(5, 4);
    e.resize(5, 4);
    for (int a = 0; a < 5; ++a)
        for (int i = 0; i < 4; ++i) c(a, i) = uni(rng);
    for (int a = 0; a < 5; ++a)
        for (int i = 0; i < 4; ++i) e(a, i) = uni(rng);
}

HermitianMatrix HamiltonianModel::gradient(const ParameterPoint& lambda, Eigen::Index j,
                                           double h) const {
    if (j < 0 || j >= param_count) throw IndexOutOfRange("gradient index out of range");
    if (analytic_gradient) return analytic_gradient(lambda, j);
    return gradient_fd(*this, lambda, j, h);
}

HermitianMatrix gradient_fd(const HamiltonianModel& model, const ParameterPoint& lambda,
                            Eigen::Index j, double h) {
    if (j < 0 || j >= model.param_count) throw IndexOutOfRange("gradient index out of range");
    if (h < 1e-8 || h > 1e-2) throw InvalidSetting("gradient_fd: step h out of [1e-8, 1e-2]");
    ParameterPoint lp = lambda, lm = lambda;
    lp(j) += h;
    lm(j) -= h;
    const Matrix diff = (model.evaluate(lp).mat() - model.evaluate(lm).mat()) / (2.0 * h);
    return HermitianMatrix(0.5 * (diff + diff.adjoint().eval()));
}

HamiltonianModel builtin_model(const std::string& name, const ModelSettings& settings) {
    if (name == "spin_half") {
        check_keys(settings, {"delta"});
        const double delta = get_double(settings, "delta", 1.0);
        if (delta <= 0.0) throw InvalidSetting("spin_half: delta must be positive");
        HamiltonianModel model;
        model.name = name;
        model.dim = 2;
        model.param_count = 2;
        model.degeneracy = 1;
        model.evaluate = [delta](const ParameterPoint& l) {
            check_lambda(l, 2);
            const double st = std::sin(l(0)), ct = std::cos(l(0));
            const double cp = std::cos(l(1)), sp = std::sin(l(1));
            Matrix h = 0.5 * delta *
                       (st * cp * pauli(1) + st * sp * pauli(2) + ct * pauli(3));
            return HermitianMatrix(h);
        };
        model.analytic_gradient = [delta](const ParameterPoint& l, Eigen::Index j) {
            check_lambda(l, 2);
            if (j < 0 || j >= 2) throw IndexOutOfRange("gradient index out of range");
            const double st = std::sin(l(0)), ct = std::cos(l(0));
            const double cp = std::cos(l(1)), sp = std::sin(l(1));
            Matrix h;
            if (j == 0)
                h = 0.5 * delta * (ct * cp * pauli(1) + ct * sp * pauli(2) - st * pauli(3));
            else
                h = 0.5 * delta * (-st * sp * pauli(1) + st * cp * pauli(2));
            return HermitianMatrix(h);
        };
        return model;
    }
    if (name == "dirac4" || name == "weyl4") {
        check_keys(settings, {"mass"});
        // weyl4 sits at the dirac4 gap-closing mass so small lambda probes the
        // near-degenerate regime.
        const double mass = get_double(settings, "mass", name == "weyl4" ? -4.0 : 1.0);
        Eigen::MatrixXd c, e;
        dirac4_tables(c, e);
        HamiltonianModel model = make_gamma_model(name, c, e);
        auto base_eval = model.evaluate;
        model.evaluate = [base_eval, mass](const ParameterPoint& l) {
            Matrix h = base_eval(l).mat() + mass * dirac_gammas()[4];
            return HermitianMatrix(h);
        };
        return model;
    }
    if (name == "dirac4_generic") {
        check_keys(settings, {"coeff_seed", "c", "e"});
        const bool has_c = settings.count("c") > 0;
        const bool has_e = settings.count("e") > 0;
        if (has_c != has_e)
            throw InvalidSetting("dirac4_generic: provide both c and e tables or neither");
        Eigen::MatrixXd c, e;
        if (has_c) {
            c = std::get<Eigen::MatrixXd>(settings.at("c"));
            e = std::get<Eigen::MatrixXd>(settings.at("e"));
        } else {
            const long seed = get_long(settings, "coeff_seed", 12);
            dirac4_generic_coefficients(static_cast<unsigned long>(seed), c, e);
        }
        return make_gamma_model(name, c, e);
    }
    throw UnknownModel("unknown builtin model '" + name + "'");
}

BandDecomposition decompose_bands(const HamiltonianModel& model, const ParameterPoint& lambda,
                                  double grouping_tol) {
    const HermitianMatrix h = model.evaluate(lambda);
    const Eigen::Index d = h.dim();
    if (d % 2 != 0) throw NotTwoBand("decompose_bands: odd dimension");
    const Eigen::Index n = d / 2;

    const double scale = std::max(h.mat().cwiseAbs().maxCoeff(), 1e-300);
    if (grouping_tol <= 0.0) grouping_tol = 1e-8 * scale;

    const EigenSystem sys = hermitian_eig(h);

    // Split at the largest gap between consecutive eigenvalues.
    Eigen::Index split = 1;
    double largest = -1.0;
    for (Eigen::Index i = 1; i < d; ++i) {
        const double g = sys.values(i) - sys.values(i - 1);
        if (g > largest) {
            largest = g;
            split = i;
        }
    }
    if (split != n) throw NotTwoBand("decompose_bands: bands have unequal degeneracy");

    const double spread_lo = sys.values(n - 1) - sys.values(0);
    const double spread_hi = sys.values(d - 1) - sys.values(n);
    if (spread_lo > grouping_tol || spread_hi > grouping_tol)
        throw NotTwoBand("decompose_bands: within-band spread exceeds grouping tolerance");

    BandDecomposition bands;
    bands.grouping_tol = grouping_tol;
    bands.energy_minus = sys.values.head(n).mean();
    bands.energy_plus = sys.values.tail(n).mean();
    bands.gap = bands.energy_plus - bands.energy_minus;
    if (bands.gap <= 10.0 * grouping_tol)
        throw GapCollapse("decompose_bands: band gap collapsed");
    bands.frame_minus = sys.vectors.leftCols(n);
    bands.frame_plus = sys.vectors.rightCols(n);
    return bands;
}

} // namespace qgt
