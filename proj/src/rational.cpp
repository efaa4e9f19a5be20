#include "fdshape/rational.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace fdshape {

namespace {

constexpr double kTrimTol = 1e-12;

// Roots grouped for real-coefficient reconstruction: either a real root or
// a conjugate pair represented by its upper-half member.
struct RootGroup {
    Complex r;
    bool pair = false;
    bool used = false;
};

std::vector<RootGroup> group_roots(const std::vector<Complex>& roots) {
    std::vector<RootGroup> out;
    std::vector<bool> taken(roots.size(), false);
    for (size_t i = 0; i < roots.size(); ++i) {
        if (taken[i]) continue;
        const Complex r = roots[i];
        if (std::abs(r.imag()) <= 1e-12 * (1.0 + std::abs(r))) {
            out.push_back({Complex(r.real(), 0.0), false, false});
            taken[i] = true;
            continue;
        }
        // Find the conjugate partner (exact for eigenvalues of real
        // matrices, near-exact otherwise).
        size_t best = i;
        double bestd = std::numeric_limits<double>::infinity();
        for (size_t j = i + 1; j < roots.size(); ++j) {
            if (taken[j]) continue;
            const double d = std::abs(roots[j] - std::conj(r));
            if (d < bestd) { bestd = d; best = j; }
        }
        if (best != i && bestd <= 1e-6 * (1.0 + std::abs(r))) {
            taken[i] = taken[best] = true;
            Complex rep = r.imag() > 0 ? r : roots[best];
            if (rep.imag() < 0) rep = std::conj(rep);
            out.push_back({rep, true, false});
        } else {
            // Unpaired complex root; keep it real-ified to stay safe.
            taken[i] = true;
            out.push_back({Complex(r.real(), std::abs(r.imag())), true, false});
        }
    }
    std::sort(out.begin(), out.end(), [](const RootGroup& a, const RootGroup& b) {
        const double ma = std::abs(a.r), mb = std::abs(b.r);
        if (ma != mb) return ma < mb;
        if (a.r.real() != b.r.real()) return a.r.real() < b.r.real();
        return a.r.imag() < b.r.imag();
    });
    return out;
}

std::vector<double> poly_from_groups(const std::vector<RootGroup>& groups,
                                     double lead) {
    std::vector<double> p{lead};
    for (const auto& g : groups) {
        if (g.pair) {
            const double re = g.r.real(), m2 = std::norm(g.r);
            p = poly_mul(p, {1.0, -2.0 * re, m2});
        } else {
            p = poly_mul(p, {1.0, -g.r.real()});
        }
    }
    return p;
}

std::vector<Complex> groups_to_roots(const std::vector<RootGroup>& groups) {
    std::vector<Complex> out;
    for (const auto& g : groups) {
        if (g.pair) {
            out.push_back(g.r);
            out.push_back(std::conj(g.r));
        } else {
            out.push_back(g.r);
        }
    }
    return out;
}

bool groups_match(const RootGroup& a, const RootGroup& b) {
    if (a.pair != b.pair) return false;
    return std::abs(a.r - b.r) <= kCancelTol * (1.0 + std::abs(a.r));
}

// Greedy nearest-match of a's groups into b's; marks used flags in b and
// returns for each a-group the matched index (or -1).
std::vector<int> match_groups(const std::vector<RootGroup>& a,
                              std::vector<RootGroup>& b) {
    std::vector<int> match(a.size(), -1);
    for (size_t i = 0; i < a.size(); ++i) {
        int best = -1;
        double bestd = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < b.size(); ++j) {
            if (b[j].used || b[j].pair != a[i].pair) continue;
            const double d = std::abs(a[i].r - b[j].r);
            if (d < bestd) { bestd = d; best = static_cast<int>(j); }
        }
        if (best >= 0 && bestd <= kCancelTol * (1.0 + std::abs(a[i].r))) {
            match[i] = best;
            b[best].used = true;
        }
    }
    return match;
}

void balance_matrix(Matrix& M) {
    const auto n = M.rows();
    bool changed = true;
    for (int pass = 0; pass < 50 && changed; ++pass) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                r += std::abs(M(i, j));
                c += std::abs(M(j, i));
            }
            if (r == 0.0 || c == 0.0) continue;
            double f = 1.0;
            while (c < r / 2.0) { c *= 2.0; r /= 2.0; f *= 2.0; }
            while (c >= r * 2.0) { c /= 2.0; r *= 2.0; f /= 2.0; }
            if (f != 1.0) {
                M.row(i) /= f;
                M.col(i) *= f;
                changed = true;
            }
        }
    }
}

// Quotient and remainder of a monic-denominator division, used to split a
// proper fraction into feedthrough + strictly proper part.
void poly_divmod(const std::vector<double>& num, const std::vector<double>& den,
                 std::vector<double>& quot, std::vector<double>& rem) {
    rem = num;
    quot.clear();
    const int dn = static_cast<int>(den.size()) - 1;
    while (static_cast<int>(rem.size()) - 1 >= dn && rem.size() > 1) {
        const double q = rem[0] / den[0];
        quot.push_back(q);
        for (size_t i = 0; i < den.size(); ++i) rem[i] -= q * den[i];
        rem.erase(rem.begin());
    }
    if (quot.empty()) quot.push_back(0.0);
    if (rem.empty()) rem.push_back(0.0);
    rem = poly_trim(std::move(rem));
}

}  // namespace

std::vector<double> poly_trim(std::vector<double> a) {
    double mx = 0.0;
    for (double c : a) mx = std::max(mx, std::abs(c));
    size_t k = 0;
    while (k + 1 < a.size() && std::abs(a[k]) <= kTrimTol * mx) ++k;
    a.erase(a.begin(), a.begin() + k);
    if (a.empty()) a.push_back(0.0);
    if (a.size() == 1 && std::abs(a[0]) <= 0.0) a[0] = 0.0;
    return a;
}

std::vector<double> poly_mul(const std::vector<double>& a,
                             const std::vector<double>& b) {
    std::vector<double> p(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) p[i + j] += a[i] * b[j];
    return p;
}

std::vector<double> poly_add(const std::vector<double>& a,
                             const std::vector<double>& b) {
    const size_t n = std::max(a.size(), b.size());
    std::vector<double> p(n, 0.0);
    for (size_t i = 0; i < a.size(); ++i) p[n - a.size() + i] += a[i];
    for (size_t i = 0; i < b.size(); ++i) p[n - b.size() + i] += b[i];
    return p;
}

std::vector<Complex> poly_roots(const std::vector<double>& a_in) {
    std::vector<double> a = poly_trim(a_in);
    const int n = static_cast<int>(a.size()) - 1;
    std::vector<Complex> roots;
    if (n <= 0 || a[0] == 0.0) return roots;
    if (n == 1) {
        roots.push_back(Complex(-a[1] / a[0], 0.0));
        return roots;
    }
    if (n == 2) {
        const double b = a[1] / a[0], c = a[2] / a[0];
        const double disc = b * b - 4.0 * c;
        if (disc >= 0.0) {
            // Stable quadratic formula via the larger-magnitude root.
            const double q = -0.5 * (b + (b >= 0 ? 1.0 : -1.0) * std::sqrt(disc));
            const double r1 = q;
            const double r2 = (q != 0.0) ? c / q : 0.0;
            roots.push_back(Complex(r1, 0.0));
            roots.push_back(Complex(r2, 0.0));
        } else {
            const double re = -0.5 * b, im = 0.5 * std::sqrt(-disc);
            roots.push_back(Complex(re, im));
            roots.push_back(Complex(re, -im));
        }
        return roots;
    }
    Matrix comp = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) comp(i + 1, i) = 1.0;
    for (int i = 0; i < n; ++i) comp(0, i) = -a[i + 1] / a[0];
    balance_matrix(comp);
    Eigen::EigenSolver<Matrix> es(comp, /*computeEigenvectors=*/false);
    for (Eigen::Index i = 0; i < n; ++i) roots.push_back(es.eigenvalues()(i));
    return roots;
}

RationalTF::RationalTF(std::vector<double> num_, std::vector<double> den_) {
    num = poly_trim(std::move(num_));
    den = poly_trim(std::move(den_));
    if (den.size() == 1 && den[0] == 0.0)
        throw DegenerateFraction("denominator is identically zero");
    const double lead = den[0];
    for (double& c : den) c /= lead;
    for (double& c : num) c /= lead;
    if (num.size() == 1 && num[0] == 0.0) den = {1.0};
}

RationalTF RationalTF::constant(double k) { return RationalTF({k}, {1.0}); }

Complex RationalTF::evaluate(Complex s) const {
    auto horner = [&](const std::vector<double>& p) {
        Complex v(0.0, 0.0);
        for (double c : p) v = v * s + c;
        return v;
    };
    return horner(num) / horner(den);
}

double RationalTF::evaluate_mag(double omega) const {
    return std::abs(evaluate(Complex(0.0, omega)));
}

RationalTF cancel(const RationalTF& f) {
    if (f.is_zero() || f.num_degree() == 0 || f.den_degree() == 0) return f;
    auto ng = group_roots(poly_roots(f.num));
    auto dg = group_roots(poly_roots(f.den));
    std::vector<int> match = match_groups(ng, dg);
    std::vector<RootGroup> nkeep, dkeep;
    for (size_t i = 0; i < ng.size(); ++i)
        if (match[i] < 0) nkeep.push_back(ng[i]);
    for (const auto& g : dg)
        if (!g.used) dkeep.push_back(g);
    if (nkeep.size() == ng.size()) return f;  // nothing cancelled
    const double nlead = f.num[0];
    return RationalTF(poly_from_groups(nkeep, nlead), poly_from_groups(dkeep, 1.0));
}

RationalTF tf_add(const RationalTF& a, const RationalTF& b) {
    return cancel(RationalTF(
        poly_add(poly_mul(a.num, b.den), poly_mul(b.num, a.den)),
        poly_mul(a.den, b.den)));
}

RationalTF tf_sub(const RationalTF& a, const RationalTF& b) {
    return tf_add(a, tf_scale(b, -1.0));
}

RationalTF tf_mul(const RationalTF& a, const RationalTF& b) {
    return cancel(RationalTF(poly_mul(a.num, b.num), poly_mul(a.den, b.den)));
}

RationalTF tf_scale(const RationalTF& a, double k) {
    std::vector<double> n = a.num;
    for (double& c : n) c *= k;
    return RationalTF(n, a.den);
}

RationalTF tf_inv(const RationalTF& a) {
    if (a.is_zero())
        throw DegenerateFraction("cannot invert the zero transfer function");
    return RationalTF(a.den, a.num);
}

RationalTF tf_div(const RationalTF& a, const RationalTF& b) {
    return tf_mul(a, tf_inv(b));
}

RationalTF tf_feedback(const RationalTF& g, const RationalTF& c) {
    // g/(1 + g c); the shared denominator of g cancels exactly.
    return cancel(RationalTF(
        poly_mul(g.num, c.den),
        poly_add(poly_mul(g.den, c.den), poly_mul(g.num, c.num))));
}

StateSpace tf_to_ss(const RationalTF& f) {
    if (!f.is_proper())
        throw ImproperTransfer("cannot realize an improper transfer function");
    const int n = f.den_degree();
    std::vector<double> quot, rem;
    poly_divmod(f.num, f.den, quot, rem);
    Matrix D(1, 1);
    D(0, 0) = quot.back();  // proper: quotient is a constant
    if (n == 0) return StateSpace(D);
    Matrix A = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
    for (int j = 0; j < n; ++j) A(n - 1, j) = -f.den[n - j];
    Matrix B = Matrix::Zero(n, 1);
    B(n - 1, 0) = 1.0;
    Matrix C = Matrix::Zero(1, n);
    const int dr = static_cast<int>(rem.size()) - 1;
    for (int k = 0; k <= dr; ++k) C(0, k) = rem[dr - k];
    return StateSpace(A, B, C, D);
}

StateSpace tf_column_to_ss(const std::vector<RationalTF>& entries) {
    for (const auto& e : entries)
        if (!e.is_proper())
            throw ImproperTransfer("column entry is improper");

    // Least common denominator by root-group matching across entries.
    std::vector<RootGroup> lcd;
    for (const auto& e : entries) {
        auto eg = group_roots(poly_roots(e.den));
        for (auto& g : lcd) g.used = false;
        std::vector<int> match = match_groups(eg, lcd);
        for (size_t i = 0; i < eg.size(); ++i)
            if (match[i] < 0) lcd.push_back({eg[i].r, eg[i].pair, false});
    }
    std::vector<double> q = poly_from_groups(lcd, 1.0);
    const int n = static_cast<int>(q.size()) - 1;

    const int p = static_cast<int>(entries.size());
    Matrix C = Matrix::Zero(p, n);
    Matrix D = Matrix::Zero(p, 1);
    for (int i = 0; i < p; ++i) {
        auto eg = group_roots(poly_roots(entries[i].den));
        for (auto& g : lcd) g.used = false;
        std::vector<int> match = match_groups(eg, lcd);
        std::vector<RootGroup> extra;
        std::vector<bool> used(lcd.size(), false);
        for (int m : match)
            if (m >= 0) used[m] = true;
        for (size_t j = 0; j < lcd.size(); ++j)
            if (!used[j]) extra.push_back(lcd[j]);
        std::vector<double> phat =
            poly_mul(entries[i].num, poly_from_groups(extra, 1.0));
        std::vector<double> quot, rem;
        poly_divmod(phat, q, quot, rem);
        if (quot.size() > 1)
            throw ImproperTransfer("column entry is improper over the LCD");
        D(i, 0) = quot.back();
        const int dr = static_cast<int>(rem.size()) - 1;
        for (int k = 0; k <= dr; ++k) C(i, k) = rem[dr - k];
    }
    if (n == 0) return StateSpace(D);
    Matrix A = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
    for (int j = 0; j < n; ++j) A(n - 1, j) = -q[n - j];
    Matrix B = Matrix::Zero(n, 1);
    B(n - 1, 0) = 1.0;
    return StateSpace(A, B, C, D);
}

ZpkForm ss_to_zpk(const StateSpace& sys_in) {
    if (sys_in.inputs() != 1 || sys_in.outputs() != 1)
        throw DimensionMismatch("ss_to_zpk expects a SISO system");
    StateSpace sys = balance_states(sys_in);
    const auto n = sys.order();

    ZpkForm f;
    if (n == 0) {
        f.gain = sys.D(0, 0);
        return f;
    }
    Eigen::EigenSolver<Matrix> es(sys.A, /*computeEigenvectors=*/false);
    for (Eigen::Index i = 0; i < n; ++i) f.poles.push_back(es.eigenvalues()(i));

    const double dmag = std::abs(sys.D(0, 0));
    const double cb = sys.B.cwiseAbs().maxCoeff() * sys.C.cwiseAbs().maxCoeff();
    if (dmag > 1e-9 * (1.0 + cb)) {
        // Biproper: zeros are eigenvalues of A - B D^{-1} C.
        Matrix Az = sys.A - sys.B * (sys.C / sys.D(0, 0));
        Eigen::EigenSolver<Matrix> ez(Az, /*computeEigenvectors=*/false);
        for (Eigen::Index i = 0; i < n; ++i)
            f.zeros.push_back(ez.eigenvalues()(i));
    } else {
        // Strictly proper (or nearly): generalized eigenvalues of the
        // system pencil; infinite ones show up with vanishing beta.
        Matrix M1(n + 1, n + 1), M2 = Matrix::Zero(n + 1, n + 1);
        M1.topLeftCorner(n, n) = sys.A;
        M1.topRightCorner(n, 1) = sys.B;
        M1.bottomLeftCorner(1, n) = sys.C;
        M1(n, n) = sys.D(0, 0);
        M2.topLeftCorner(n, n) = Matrix::Identity(n, n);
        Eigen::GeneralizedEigenSolver<Matrix> ges(M1, M2);
        for (Eigen::Index i = 0; i < ges.alphas().size(); ++i) {
            const Complex a = ges.alphas()(i);
            const double b = ges.betas()(i);
            if (std::abs(b) > 1e-8 * (std::abs(a) + std::abs(b)))
                f.zeros.push_back(a / b);
        }
    }

    // Gain from a probe point kept clear of every root.
    double gm = 1.0;
    int cnt = 0;
    for (const auto& r : f.poles) { gm *= (1.0 + std::abs(r)); ++cnt; }
    for (const auto& r : f.zeros) { gm *= (1.0 + std::abs(r)); ++cnt; }
    double w0 = 1.2345678 * std::pow(gm, cnt > 0 ? 1.0 / cnt : 1.0);
    Complex s0;
    for (int tries = 0; tries < 64; ++tries) {
        s0 = Complex(0.0, w0);
        double mind = std::numeric_limits<double>::infinity();
        for (const auto& r : f.poles) mind = std::min(mind, std::abs(s0 - r));
        for (const auto& r : f.zeros) mind = std::min(mind, std::abs(s0 - r));
        if (mind >= 1e-6 * (1.0 + std::abs(s0))) break;
        w0 *= 1.6180339887;
    }
    Complex val = evaluate(sys, s0)(0, 0);
    Complex ratio(1.0, 0.0);
    const size_t nz = f.zeros.size(), np = f.poles.size();
    for (size_t i = 0; i < std::max(nz, np); ++i) {
        if (i < nz) ratio *= (s0 - f.zeros[i]);
        if (i < np) ratio /= (s0 - f.poles[i]);
    }
    f.gain = (val / ratio).real();
    return f;
}

ZpkForm zpk_cancel(const ZpkForm& f) {
    auto zg = group_roots(f.zeros);
    auto pg = group_roots(f.poles);
    std::vector<int> match = match_groups(zg, pg);
    ZpkForm out;
    out.gain = f.gain;
    std::vector<RootGroup> zkeep, pkeep;
    for (size_t i = 0; i < zg.size(); ++i)
        if (match[i] < 0) zkeep.push_back(zg[i]);
    for (const auto& g : pg)
        if (!g.used) pkeep.push_back(g);
    out.zeros = groups_to_roots(zkeep);
    out.poles = groups_to_roots(pkeep);
    return out;
}

ZpkForm zpk_inv(const ZpkForm& f) {
    if (f.gain == 0.0)
        throw DegenerateFraction("cannot invert a zero-gain system");
    ZpkForm out;
    out.zeros = f.poles;
    out.poles = f.zeros;
    out.gain = 1.0 / f.gain;
    return out;
}

StateSpace zpk_to_ss(const ZpkForm& f) {
    if (!f.is_proper())
        throw ImproperTransfer("zpk form has more zeros than poles");
    auto zg = group_roots(f.zeros);
    auto pg = group_roots(f.poles);

    std::vector<RootGroup> zpairs, zreals, ppairs, preals;
    for (const auto& g : zg) (g.pair ? zpairs : zreals).push_back(g);
    for (const auto& g : pg) (g.pair ? ppairs : preals).push_back(g);

    auto take_nearest = [](std::vector<RootGroup>& pool, const Complex& ref,
                           int count, std::vector<RootGroup>& out) {
        for (int k = 0; k < count && !pool.empty(); ++k) {
            size_t best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < pool.size(); ++j) {
                const double d = std::abs(std::abs(pool[j].r) - std::abs(ref));
                if (d < bestd) { bestd = d; best = j; }
            }
            out.push_back(pool[best]);
            pool.erase(pool.begin() + best);
        }
    };

    struct Section {
        std::vector<RootGroup> poles, zeros;
    };
    std::vector<Section> sections;

    // Pole pairs get a zero pair when available, else up to two real zeros.
    for (auto& pp : ppairs) {
        Section s;
        s.poles.push_back(pp);
        if (!zpairs.empty())
            take_nearest(zpairs, pp.r, 1, s.zeros);
        else
            take_nearest(zreals, pp.r, 2, s.zeros);
        sections.push_back(std::move(s));
    }
    // Remaining zero pairs need two real poles in one section.
    while (!zpairs.empty() && preals.size() >= 2) {
        Section s;
        take_nearest(preals, zpairs.front().r, 2, s.poles);
        s.zeros.push_back(zpairs.front());
        zpairs.erase(zpairs.begin());
        sections.push_back(std::move(s));
    }
    if (!zpairs.empty())
        throw ImproperTransfer("zpk form cannot be sectioned with real poles");
    // Real poles, each with at most one real zero.
    for (auto& pr : preals) {
        Section s;
        s.poles.push_back(pr);
        take_nearest(zreals, pr.r, 1, s.zeros);
        sections.push_back(std::move(s));
    }
    if (!zreals.empty())
        throw ImproperTransfer("zpk form has more zeros than poles");

    StateSpace acc(Matrix::Constant(1, 1, 1.0));
    for (const auto& s : sections) {
        RationalTF sec(poly_from_groups(s.zeros, 1.0),
                       poly_from_groups(s.poles, 1.0));
        acc = series(acc, tf_to_ss(sec));
    }
    return scale_output(acc, f.gain);
}

}  // namespace fdshape
