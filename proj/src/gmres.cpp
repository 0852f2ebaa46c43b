#include "molt/gmres.hpp"

#include "molt/errors.hpp"

#include <cmath>
#include <sstream>

namespace molt {

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace

std::vector<double> LinearOperator::operator()(std::span<const double> in) const
{
    std::vector<double> out(dim);
    apply(in, out);
    return out;
}

double relative_residual(const LinearOperator& op, std::span<const double> x, std::span<const double> rhs)
{
    std::vector<double> r = op(x);
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = rhs[i] - r[i];
    const double b = norm2(rhs);
    return b == 0.0 ? norm2(r) : norm2(r) / b;
}

GmresResult gmres_solve(const LinearOperator& op, std::span<const double> rhs, const GmresOptions& opts)
{
    const std::size_t n = op.dim;
    if (rhs.size() != n)
        throw ConfigError("gmres_solve: right-hand side size does not match the operator");
    if (opts.max_iter < 1 || !(opts.tol > 0.0))
        throw ConfigError("gmres_solve: need max_iter >= 1 and tol > 0");

    GmresResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(rhs);
    if (bnorm == 0.0) {
        res.history.push_back(0.0);
        return res;
    }

    std::vector<double> r(rhs.begin(), rhs.end());
    double rel = 1.0;
    res.history.push_back(rel);
    while (res.iterations < opts.max_iter) {
        const double beta = norm2(r);
        const int m = opts.max_iter - res.iterations;
        std::vector<std::vector<double>> V;
        V.reserve(m + 1);
        V.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i)
            V[0][i] = r[i] / beta;
        std::vector<std::vector<double>> H; // column j has j + 2 entries
        std::vector<double> cs, sn, g{beta};
        int k = 0;
        bool estimate_done = false;
        while (k < m) {
            std::vector<double> w(n);
            op.apply(V[k], w);
            std::vector<double> h(k + 2, 0.0);
            // classical Gram-Schmidt, applied twice
            for (int pass = 0; pass < 2; ++pass)
                for (int j = 0; j <= k; ++j) {
                    const double c = dot(w, V[j]);
                    h[j] += c;
                    for (std::size_t i = 0; i < n; ++i)
                        w[i] -= c * V[j][i];
                }
            h[k + 1] = norm2(w);
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            const double d = std::hypot(h[k], h[k + 1]);
            const double c = d == 0.0 ? 1.0 : h[k] / d, s = d == 0.0 ? 0.0 : h[k + 1] / d;
            const double hk1 = h[k + 1];
            h[k] = d;
            h[k + 1] = 0.0;
            cs.push_back(c);
            sn.push_back(s);
            g.push_back(-s * g[k]);
            g[k] *= c;
            H.push_back(std::move(h));
            ++k;
            ++res.iterations;
            const double est = std::fabs(g[k]) / bnorm;
            res.history.push_back(est);
            if (est <= opts.tol || hk1 == 0.0) {
                estimate_done = true;
                break;
            }
            V.emplace_back(n);
            for (std::size_t i = 0; i < n; ++i)
                V[k][i] = w[i] / hk1;
        }
        // back substitution for the k x k triangle
        std::vector<double> y(k);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j)
                s -= H[j][i] * y[j];
            y[i] = s / H[i][i];
        }
        for (int j = 0; j < k; ++j)
            for (std::size_t i = 0; i < n; ++i)
                res.x[i] += y[j] * V[j][i];

        std::vector<double> ax = op(res.x);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = rhs[i] - ax[i];
        rel = norm2(r) / bnorm;
        res.residual = rel;
        if (rel <= opts.tol)
            return res;
        if (!estimate_done)
            break;
        res.history.back() = rel;
    }
    std::ostringstream msg;
    msg << "gmres_solve: relative residual " << rel << " above " << opts.tol << " after " << res.iterations
        << " iterations";
    throw ConvergenceError(msg.str(), res.history);
}

} // namespace molt
