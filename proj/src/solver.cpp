// rscran: downlink C-RAN rate-splitting simulator and optimization library
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "rscran/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace rscran
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

// Newton workspace. The Hessian of the barrier-augmented Lagrangian splits
// into dense per-beamformer blocks, one dense (t,d) block, a diagonal
// remainder, and a low-rank term over the constraint gradients which is
// handled through a Schur complement (Sherman-Morrison-Woodbury).
struct Workspace
{
    const SubproblemSpec &spec;
    int n, m;

    struct DBlock
    {
        int offset, dim;
        arma::mat a;
        arma::mat chol_l;
    };
    std::vector<DBlock> blocks;
    std::vector<int> coord_block; // per coordinate: block id or -1 (diagonal region)
    arma::vec bdiag;

    std::vector<std::vector<arma::uword>> touch; // per constraint: gradient support
    arma::mat u;                                 // n x m constraint gradients
    arma::vec gval;                              // m constraint values
    arma::vec cscale;                            // m residual scales

    arma::uvec lo_idx, hi_idx;

    explicit Workspace(const SubproblemSpec &s)
        : spec(s), n(s.n), m(static_cast<int>(s.constraints.size()))
    {
        coord_block.assign(n, -1);
        for (const auto &b : s.wblocks)
        {
            blocks.push_back({b.offset, b.dim, arma::mat(b.dim, b.dim), arma::mat()});
            for (int i = 0; i < b.dim; ++i)
                coord_block[b.offset + i] = static_cast<int>(blocks.size()) - 1;
        }
        if (s.td_count > 0)
        {
            blocks.push_back(
                {s.td_begin, s.td_count, arma::mat(s.td_count, s.td_count), arma::mat()});
            for (int i = 0; i < s.td_count; ++i)
                coord_block[s.td_begin + i] = static_cast<int>(blocks.size()) - 1;
        }
        bdiag.zeros(n);
        u.zeros(n, std::max(m, 1));
        gval.zeros(std::max(m, 1));
        cscale.ones(std::max(m, 1));

        touch.resize(m);
        for (int i = 0; i < m; ++i)
        {
            const Constraint &c = s.constraints[i];
            std::vector<arma::uword> coords;
            for (const auto &t : c.rank1)
            {
                const WBlockInfo &b = s.wblocks[t.block];
                for (int q = 0; q < b.dim; ++q)
                    coords.push_back(b.offset + q);
            }
            for (const auto &t : c.diag)
                for (arma::uword idx : t.coords)
                    coords.push_back(idx);
            for (const auto &t : c.pairs)
            {
                coords.push_back(t.i);
                coords.push_back(t.j);
            }
            for (const auto &[idx, val] : c.lin)
            {
                (void)val;
                coords.push_back(idx);
            }
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
            touch[i] = std::move(coords);
            cscale(i) = std::max(1.0, std::abs(c.constant));
        }

        std::vector<arma::uword> lo, hi;
        for (int j = 0; j < n; ++j)
        {
            if (std::isfinite(s.lb(j)))
                lo.push_back(j);
            if (std::isfinite(s.ub(j)))
                hi.push_back(j);
        }
        lo_idx = arma::uvec(lo);
        hi_idx = arma::uvec(hi);
    }

    void eval_constraints(const arma::vec &x, bool with_grad)
    {
        if (with_grad)
            u.zeros();
        for (int i = 0; i < m; ++i)
        {
            const Constraint &c = spec.constraints[i];
            double v = c.constant;
            for (const auto &t : c.rank1)
            {
                const WBlockInfo &b = spec.wblocks[t.block];
                const int r = static_cast<int>(b.rows.n_elem);
                const std::complex<double> z = spec.block_dot(x, t.block, t.h);
                v += t.coeff * std::norm(z);
                if (with_grad)
                {
                    // d|z|^2 = 2(Re z * u1 + Im z * u2)
                    const double a = 2.0 * t.coeff * z.real();
                    const double bb = 2.0 * t.coeff * z.imag();
                    for (int q = 0; q < r; ++q)
                    {
                        const double hr = t.h(q).real(), hi2 = t.h(q).imag();
                        u(b.offset + q, i) += a * hr - bb * hi2;
                        u(b.offset + r + q, i) += a * hi2 + bb * hr;
                    }
                }
            }
            for (const auto &t : c.diag)
            {
                double ssum = 0.0;
                for (arma::uword idx : t.coords)
                {
                    ssum += x(idx) * x(idx);
                    if (with_grad)
                        u(idx, i) += 2.0 * t.coeff * x(idx);
                }
                v += t.coeff * ssum;
            }
            for (const auto &t : c.pairs)
            {
                const double sum = x(t.i) + x(t.j);
                v += t.coeff * sum * sum;
                if (with_grad)
                {
                    u(t.i, i) += 2.0 * t.coeff * sum;
                    u(t.j, i) += 2.0 * t.coeff * sum;
                }
            }
            for (const auto &[idx, val] : c.lin)
            {
                v += val * x(idx);
                if (with_grad)
                    u(idx, i) += val;
            }
            gval(i) = v;
        }
    }

    // B = Q + sum_i lambda_i Hess(g_i) + bound barrier diagonals + damping
    void build_b(const arma::vec &x, const arma::vec &lambda, const arma::vec &bound_diag,
                 double damp)
    {
        for (auto &blk : blocks)
            blk.a.zeros();
        bdiag.zeros();
        auto add_diag = [&](arma::uword idx, double v) {
            const int b = coord_block[idx];
            if (b < 0)
                bdiag(idx) += v;
            else
                blocks[b].a(idx - blocks[b].offset, idx - blocks[b].offset) += v;
        };
        for (int j = 0; j < n; ++j)
            add_diag(j, spec.obj_quad_diag(j) + bound_diag(j) + damp + 1e-12);

        for (int i = 0; i < m; ++i)
        {
            const double w = lambda(i);
            if (w <= 0.0)
                continue;
            const Constraint &c = spec.constraints[i];
            for (const auto &t : c.rank1)
            {
                DBlock &blk = blocks[coord_block[spec.wblocks[t.block].offset]];
                const WBlockInfo &binfo = spec.wblocks[t.block];
                const int r = static_cast<int>(binfo.rows.n_elem);
                const int base = binfo.offset - blk.offset;
                const double s = 2.0 * t.coeff * w;
                // rank-2 update with u1 = [Re h; Im h], u2 = [-Im h; Re h]
                for (int p = 0; p < r; ++p)
                {
                    const double apr = t.h(p).real(), api = t.h(p).imag();
                    for (int q = p; q < r; ++q)
                    {
                        const double bqr = t.h(q).real(), bqi = t.h(q).imag();
                        // u1 u1^T + u2 u2^T has a 2x2 circulant structure per
                        // complex pair: [c, -d; d, c] with c = Re(h_p conj(h_q))...
                        const double cc = apr * bqr + api * bqi; // Re(h_p * conj(h_q))
                        const double dd = api * bqr - apr * bqi; // Im(h_p * conj(h_q))
                        blk.a(base + p, base + q) += s * cc;
                        blk.a(base + r + p, base + r + q) += s * cc;
                        blk.a(base + p, base + r + q) += s * (-dd);
                        blk.a(base + r + p, base + q) += s * dd;
                        if (p != q)
                        {
                            blk.a(base + q, base + p) += s * cc;
                            blk.a(base + r + q, base + r + p) += s * cc;
                            blk.a(base + r + q, base + p) += s * (-dd);
                            blk.a(base + q, base + r + p) += s * dd;
                        }
                    }
                }
            }
            for (const auto &t : c.diag)
                for (arma::uword idx : t.coords)
                    add_diag(idx, 2.0 * t.coeff * w);
            for (const auto &t : c.pairs)
            {
                DBlock &blk = blocks[coord_block[t.i]];
                const int li = t.i - blk.offset, lj = t.j - blk.offset;
                const double s = 2.0 * t.coeff * w;
                blk.a(li, li) += s;
                blk.a(lj, lj) += s;
                blk.a(li, lj) += s;
                blk.a(lj, li) += s;
            }
        }
    }

    bool factor_b()
    {
        for (auto &blk : blocks)
        {
            if (std::getenv("RSCRAN_SOLVER_TRACE3"))
                std::fprintf(stderr, "factor blk off=%d dim=%d mindiag=%.3e maxdiag=%.3e finite=%d\n",
                             blk.offset, blk.dim, blk.a.diag().min(), blk.a.diag().max(),
                             blk.a.is_finite() ? 1 : 0);
            double ridge = 0.0;
            for (int attempt = 0; attempt < 12; ++attempt)
            {
                arma::mat a = blk.a;
                if (ridge > 0.0)
                    a.diag() += ridge;
                if (arma::chol(blk.chol_l, a, "lower"))
                {
                    if (ridge > 0.0)
                        blk.a = a;
                    break;
                }
                ridge = ridge == 0.0 ? 1e-10 * (1.0 + arma::abs(blk.a.diag()).max())
                                     : ridge * 100.0;
                if (attempt == 11)
                    return false;
            }
        }
        for (arma::uword j = 0; j < bdiag.n_elem; ++j)
            if (coord_block[j] < 0 && !(bdiag(j) > 0.0))
                bdiag(j) = 1e-12;
        return true;
    }

    // W(:,col) = B^{-1} v restricted to the given support (full blocks it touches)
    void solve_b_into(const arma::vec &v, const std::vector<arma::uword> &support,
                      arma::mat &w_mat, int col) const
    {
        std::vector<char> done(blocks.size(), 0);
        for (arma::uword idx : support)
        {
            const int b = coord_block[idx];
            if (b < 0)
                w_mat(idx, col) = v(idx) / bdiag(idx);
            else if (!done[b])
            {
                done[b] = 1;
                const DBlock &blk = blocks[b];
                const arma::span sp(blk.offset, blk.offset + blk.dim - 1);
                arma::vec rhs = v(sp);
                arma::vec y = arma::solve(arma::trimatl(blk.chol_l), rhs);
                w_mat(sp, arma::span(col, col)) =
                    arma::solve(arma::trimatu(blk.chol_l.t()), y);
            }
        }
    }

    arma::vec solve_b_full(const arma::vec &v) const
    {
        arma::vec out(n, arma::fill::zeros);
        for (const auto &blk : blocks)
        {
            const arma::span sp(blk.offset, blk.offset + blk.dim - 1);
            arma::vec rhs = v(sp);
            arma::vec y = arma::solve(arma::trimatl(blk.chol_l), rhs);
            out(sp) = arma::solve(arma::trimatu(blk.chol_l.t()), y);
        }
        for (int j = 0; j < n; ++j)
            if (coord_block[j] < 0)
                out(j) = v(j) / bdiag(j);
        return out;
    }

    arma::vec b_matvec(const arma::vec &v) const
    {
        arma::vec out(n, arma::fill::zeros);
        for (const auto &blk : blocks)
        {
            const arma::span sp(blk.offset, blk.offset + blk.dim - 1);
            out(sp) = blk.a * v(sp);
        }
        for (int j = 0; j < n; ++j)
            if (coord_block[j] < 0)
                out(j) = bdiag(j) * v(j);
        return out;
    }
};

struct IterState
{
    arma::vec x, s, lambda, zl, zh;
};

} // namespace


namespace
{
PrimalSolution solve_impl(const SubproblemSpec &spec, double solver_tol);
}

PrimalSolution solve(const SubproblemSpec &spec, double solver_tol)
{
    try
    {
        return solve_impl(spec, solver_tol);
    }
    catch (const std::exception &e)
    {
        if (std::getenv("RSCRAN_SOLVER_TRACE"))
            std::fprintf(stderr, "solve: exception: %s\n", e.what());
        PrimalSolution out;
        out.values = spec.x0;
        out.objective = spec.eval_objective(spec.x0);
        out.status = SolveStatus::NumericalTrouble;
        out.kkt_residual = std::numeric_limits<double>::infinity();
        return out;
    }
}

namespace
{
PrimalSolution solve_impl(const SubproblemSpec &spec, double solver_tol)
{
    Workspace ws(spec);
    const int n = ws.n, m = ws.m;
    const int n_lo = static_cast<int>(ws.lo_idx.n_elem);
    const int n_hi = static_cast<int>(ws.hi_idx.n_elem);
    const int m_total = m + n_lo + n_hi;

    IterState st;
    st.x = spec.x0;
    // push strictly inside the box
    for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
    {
        const arma::uword j = ws.lo_idx(q);
        const double push = std::isfinite(spec.ub(j))
                                ? std::min(1e-4, 0.25 * (spec.ub(j) - spec.lb(j)))
                                : 1e-4 * (1.0 + std::abs(spec.lb(j)));
        st.x(j) = std::max(st.x(j), spec.lb(j) + push);
    }
    for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
    {
        const arma::uword j = ws.hi_idx(q);
        const double push = std::isfinite(spec.lb(j))
                                ? std::min(1e-4, 0.25 * (spec.ub(j) - spec.lb(j)))
                                : 1e-4 * (1.0 + std::abs(spec.ub(j)));
        st.x(j) = std::min(st.x(j), spec.ub(j) - push);
    }

    ws.eval_constraints(st.x, false);
    // The anchor is feasible by construction, so slacks can hug the boundary;
    // the floor only guards against exactly-tight rows.
    const double mu0 = 1e-2;
    st.s.zeros(std::max(m, 1));
    st.lambda.zeros(std::max(m, 1));
    for (int i = 0; i < m; ++i)
    {
        st.s(i) = std::max(-ws.gval(i), 1e-4 * ws.cscale(i));
        // cap the guess: rows tight at the anchor would otherwise start with
        // huge multipliers and a needless dual-infeasibility burn-down
        st.lambda(i) = std::min(mu0 / st.s(i), 1.0);
    }
    st.zl.zeros(n);
    st.zh.zeros(n);
    for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
        st.zl(ws.lo_idx(q)) = mu0 / (st.x(ws.lo_idx(q)) - spec.lb(ws.lo_idx(q)));
    for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
        st.zh(ws.hi_idx(q)) = mu0 / (spec.ub(ws.hi_idx(q)) - st.x(ws.hi_idx(q)));

    auto obj_grad = [&](const arma::vec &x) -> arma::vec {
        return spec.obj_quad_diag % x - spec.obj_lin; // gradient of -objective
    };

    auto complementarity = [&](const IterState &t) {
        double sum = 0.0;
        for (int i = 0; i < m; ++i)
            sum += t.s(i) * t.lambda(i);
        for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
            sum += (t.x(ws.lo_idx(q)) - spec.lb(ws.lo_idx(q))) * t.zl(ws.lo_idx(q));
        for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
            sum += (spec.ub(ws.hi_idx(q)) - t.x(ws.hi_idx(q))) * t.zh(ws.hi_idx(q));
        return sum;
    };

    // Residual norm squared for a given complementarity target; used for the
    // centering fallback line search and a divergence safeguard.
    auto merit = [&](const IterState &t, const arma::mat &u_t, const arma::vec &g_t,
                     double mu_target) -> double {
        arma::vec rd = obj_grad(t.x);
        if (m > 0)
            rd += u_t * t.lambda;
        rd -= t.zl;
        rd += t.zh;
        double phi = arma::dot(rd, rd);
        for (int i = 0; i < m; ++i)
        {
            const double rp = g_t(i) + t.s(i);
            const double rc = t.s(i) * t.lambda(i) - mu_target;
            phi += rp * rp + rc * rc;
        }
        for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
        {
            const arma::uword j = ws.lo_idx(q);
            const double rc = (t.x(j) - spec.lb(j)) * t.zl(j) - mu_target;
            phi += rc * rc;
        }
        for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
        {
            const arma::uword j = ws.hi_idx(q);
            const double rc = (spec.ub(j) - t.x(j)) * t.zh(j) - mu_target;
            phi += rc * rc;
        }
        return phi;
    };

    struct Direction
    {
        arma::vec dx, ds, dlambda, dzl, dzh;
    };

    PrimalSolution out;
    const int max_iters = 200;
    int bad_steps = 0;
    double lm_damp = 0.0;
    IterState best = st;
    double best_kkt = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter)
    {
        if (!st.x.is_finite())
        {
            out.status = SolveStatus::NumericalTrouble;
            break;
        }
        ws.eval_constraints(st.x, true);
        if (!ws.gval.is_finite())
        {
            out.status = SolveStatus::NumericalTrouble;
            break;
        }

        const double mu = m_total > 0 ? complementarity(st) / m_total : 0.0;

        arma::vec rd = obj_grad(st.x);
        if (m > 0)
            rd += ws.u * st.lambda;
        rd -= st.zl;
        rd += st.zh;
        const double dscale =
            1.0 + arma::abs(spec.obj_lin).max() + arma::abs(spec.obj_quad_diag % st.x).max();
        const double dinf = arma::abs(rd).max() / dscale;

        double pinf = 0.0, prim_res = 0.0;
        for (int i = 0; i < m; ++i)
        {
            pinf = std::max(pinf, ws.gval(i) / ws.cscale(i));
            prim_res = std::max(prim_res, std::abs(ws.gval(i) + st.s(i)) / ws.cscale(i));
        }

        const double obj_scale = 1.0 + std::abs(spec.eval_objective(st.x));
        const double mu_rel = m_total > 0 ? mu * m_total / obj_scale : 0.0;

        out.kkt_residual = std::max({pinf, dinf, mu_rel, prim_res});
        out.iterations = iter;
        if (out.kkt_residual < best_kkt)
        {
            best_kkt = out.kkt_residual;
            best = st;
        }
        if (std::getenv("RSCRAN_SOLVER_TRACE"))
        {
            const arma::uword jworst = arma::abs(rd).index_max();
            std::fprintf(stderr,
                         "ipm it=%3d mu=%.3e pinf=%.3e dinf=%.3e prim=%.3e damp=%.1e bad=%d "
                         "rdmax@%llu=%.3e blk=%d\n",
                         iter, mu, pinf, dinf, prim_res, lm_damp, bad_steps,
                         (unsigned long long)jworst, rd(jworst), ws.coord_block[jworst]);
        }
        if (out.kkt_residual <= solver_tol)
        {
            out.status = SolveStatus::Optimal;
            break;
        }
        if (iter == max_iters - 1 || bad_steps > 15)
        {
            out.status = (mu_rel <= 1e3 * solver_tol && pinf > 1e4 * solver_tol)
                             ? SolveStatus::Infeasible
                             : SolveStatus::NumericalTrouble;
            break;
        }

        // barrier diagonal from the bounds
        arma::vec bound_diag(n, arma::fill::zeros);
        for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
        {
            const arma::uword j = ws.lo_idx(q);
            bound_diag(j) += st.zl(j) / std::max(st.x(j) - spec.lb(j), 1e-280);
        }
        for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
        {
            const arma::uword j = ws.hi_idx(q);
            bound_diag(j) += st.zh(j) / std::max(spec.ub(j) - st.x(j), 1e-280);
        }

        ws.build_b(st.x, st.lambda, bound_diag, lm_damp);
        if (!ws.factor_b())
        {
            out.status = SolveStatus::NumericalTrouble;
            break;
        }

        // SMW context, shared by the predictor and corrector solves
        bool solve_failed = false;
        arma::mat w;
        arma::mat schur_chol;
        arma::mat schur;
        arma::vec dvec(std::max(m, 1), arma::fill::zeros);
        bool chol_ok = false;
        if (m > 0)
        {
            w.zeros(n, m);
            for (int i = 0; i < m; ++i)
            {
                try
                {
                    ws.solve_b_into(ws.u.col(i), ws.touch[i], w, i);
                }
                catch (const std::exception &e)
                {
                    if (std::getenv("RSCRAN_SOLVER_TRACE"))
                        std::fprintf(stderr,
                                     "solve_b_into failed: i=%d family=%d touch=%zu: %s\n", i,
                                     (int)spec.constraints[i].family, ws.touch[i].size(),
                                     e.what());
                    throw;
                }
            }
            schur.zeros(m, m);
            for (int i = 0; i < m; ++i)
            {
                dvec(i) = st.lambda(i) / st.s(i);
                for (int j = i; j < m; ++j)
                {
                    double acc = 0.0;
                    for (arma::uword idx : ws.touch[i])
                        acc += ws.u(idx, i) * w(idx, j);
                    schur(i, j) = acc;
                    schur(j, i) = acc;
                }
                schur(i, i) += st.s(i) / st.lambda(i);
            }
            double ridge = 0.0;
            for (int attempt = 0; attempt < 10 && !chol_ok; ++attempt)
            {
                arma::mat s2 = schur;
                if (ridge > 0.0)
                    s2.diag() += ridge;
                chol_ok = arma::chol(schur_chol, s2, "lower");
                ridge = ridge == 0.0 ? 1e-12 * (1.0 + arma::abs(schur.diag()).max())
                                     : ridge * 100.0;
            }
            if (!chol_ok && std::getenv("RSCRAN_SOLVER_TRACE"))
                std::fprintf(stderr,
                             "    schur chol failed: finite=%d w_finite=%d u_finite=%d "
                             "s[min=%.2e max=%.2e] lam[min=%.2e max=%.2e]\n",
                             schur.is_finite() ? 1 : 0, w.is_finite() ? 1 : 0,
                             ws.u.is_finite() ? 1 : 0, st.s.min(), st.s.max(),
                             st.lambda.min(), st.lambda.max());
        }
        auto smw_solve = [&](const arma::vec &v) -> arma::vec {
            arma::vec y = ws.solve_b_full(v);
            if (m == 0)
                return y;
            arma::vec q = w.t() * v; // = U^T B^{-1} v since B is symmetric
            arma::vec tsol;
            if (chol_ok)
            {
                tsol = arma::solve(arma::trimatl(schur_chol), q);
                tsol = arma::solve(arma::trimatu(schur_chol.t()), tsol);
            }
            else if (!arma::solve(tsol, schur, q, arma::solve_opts::likely_sympd))
            {
                solve_failed = true;
                return y;
            }
            return y - w * tsol;
        };
        auto heff_matvec = [&](const arma::vec &v) -> arma::vec {
            arma::vec out2 = ws.b_matvec(v);
            if (m > 0)
                out2 += ws.u * (dvec % (ws.u.t() * v));
            return out2;
        };

        // One Newton solve for a complementarity target with optional
        // second-order (Mehrotra) correction products.
        auto solve_direction = [&](double mu_target2, const Direction *affine) -> Direction {
            Direction d;
            arma::vec rhs = -rd;
            for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
            {
                const arma::uword j = ws.lo_idx(q);
                const double gap = std::max(st.x(j) - spec.lb(j), 1e-280);
                const double corr = affine ? affine->dx(j) * affine->dzl(j) : 0.0;
                rhs(j) += (mu_target2 - gap * st.zl(j) - corr) / gap;
            }
            for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
            {
                const arma::uword j = ws.hi_idx(q);
                const double gap = std::max(spec.ub(j) - st.x(j), 1e-280);
                const double corr = affine ? -affine->dx(j) * affine->dzh(j) : 0.0;
                rhs(j) -= (mu_target2 - gap * st.zh(j) - corr) / gap;
            }
            arma::vec rc(std::max(m, 1), arma::fill::zeros);
            for (int i = 0; i < m; ++i)
            {
                const double corr = affine ? affine->ds(i) * affine->dlambda(i) : 0.0;
                rc(i) = mu_target2 - st.s(i) * st.lambda(i) - corr;
                const double beta = (rc(i) + st.lambda(i) * (ws.gval(i) + st.s(i))) / st.s(i);
                rhs -= ws.u.col(i) * beta;
            }

            d.dx = smw_solve(rhs);
            for (int refine = 0; refine < 3 && !solve_failed; ++refine)
            {
                const arma::vec resid = rhs - heff_matvec(d.dx);
                if (arma::norm(resid) <= 1e-13 * std::max(1.0, arma::norm(rhs)))
                    break;
                d.dx += smw_solve(resid);
            }

            d.ds.zeros(std::max(m, 1));
            d.dlambda.zeros(std::max(m, 1));
            for (int i = 0; i < m; ++i)
            {
                const double gdx = arma::dot(ws.u.col(i), d.dx);
                d.ds(i) = -(ws.gval(i) + st.s(i)) - gdx;
                d.dlambda(i) = (rc(i) - st.lambda(i) * d.ds(i)) / st.s(i);
            }
            d.dzl.zeros(n);
            d.dzh.zeros(n);
            for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
            {
                const arma::uword j = ws.lo_idx(q);
                const double gap = std::max(st.x(j) - spec.lb(j), 1e-280);
                const double corr = affine ? affine->dx(j) * affine->dzl(j) : 0.0;
                d.dzl(j) =
                    (mu_target2 - gap * st.zl(j) - corr - st.zl(j) * d.dx(j)) / gap;
            }
            for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
            {
                const arma::uword j = ws.hi_idx(q);
                const double gap = std::max(spec.ub(j) - st.x(j), 1e-280);
                const double corr = affine ? -affine->dx(j) * affine->dzh(j) : 0.0;
                d.dzh(j) =
                    (mu_target2 - gap * st.zh(j) - corr + st.zh(j) * d.dx(j)) / gap;
            }
            return d;
        };

        // separate primal (x, s) and dual (lambda, z) step lengths
        auto fraction_to_boundary = [&](const Direction &d, double tau) {
            std::pair<double, double> alpha{1.0, 1.0};
            auto cap = [tau](double &a, double v, double dv) {
                if (dv < 0.0)
                    a = std::min(a, -tau * v / dv);
            };
            for (int i = 0; i < m; ++i)
            {
                cap(alpha.first, st.s(i), d.ds(i));
                cap(alpha.second, st.lambda(i), d.dlambda(i));
            }
            for (arma::uword q = 0; q < ws.lo_idx.n_elem; ++q)
            {
                const arma::uword j = ws.lo_idx(q);
                cap(alpha.first, st.x(j) - spec.lb(j), d.dx(j));
                cap(alpha.second, st.zl(j), d.dzl(j));
            }
            for (arma::uword q = 0; q < ws.hi_idx.n_elem; ++q)
            {
                const arma::uword j = ws.hi_idx(q);
                cap(alpha.first, spec.ub(j) - st.x(j), -d.dx(j));
                cap(alpha.second, st.zh(j), d.dzh(j));
            }
            return alpha;
        };

        auto apply = [&](const Direction &d, double alpha_p, double alpha_d) {
            IterState t = st;
            t.x += alpha_p * d.dx;
            t.s += alpha_p * d.ds;
            t.lambda += alpha_d * d.dlambda;
            t.zl += alpha_d * d.dzl;
            t.zh += alpha_d * d.dzh;
            return t;
        };

        double sigma = 0.1;
        Direction affine;
        const double mu_floor = 0.01 * solver_tol * obj_scale / std::max(1, m_total);
        if (m_total > 0)
        {
            affine = solve_direction(0.0, nullptr);
            if (solve_failed)
            {
                out.status = SolveStatus::NumericalTrouble;
                break;
            }
            const auto alpha_aff = fraction_to_boundary(affine, 1.0);
            const IterState aff = apply(affine, alpha_aff.first, alpha_aff.second);
            const double mu_aff = complementarity(aff) / m_total;
            const double ratio = mu > 0.0 ? mu_aff / mu : 0.0;
            sigma = std::clamp(ratio * ratio * ratio, 1e-4, 0.8);
        }
        const double mu_target = m_total > 0 ? std::max(sigma * mu, mu_floor) : 0.0;

        Direction dir =
            m_total > 0 ? solve_direction(mu_target, &affine) : solve_direction(0.0, nullptr);
        if (solve_failed)
        {
            out.status = SolveStatus::NumericalTrouble;
            break;
        }

        const double phi0 = merit(st, ws.u, ws.gval, mu_target);
        const auto alphas = fraction_to_boundary(dir, 0.995);
        if (std::getenv("RSCRAN_SOLVER_TRACE"))
            std::fprintf(stderr, "    ap=%.3e ad=%.3e sigma=%.2e\n", alphas.first,
                         alphas.second, sigma);
        double alpha = std::min(alphas.first, alphas.second);
        IterState trial = apply(dir, alphas.first, alphas.second);
        ws.eval_constraints(trial.x, true);
        double phi = merit(trial, ws.u, ws.gval, mu_target);

        bool ok_step = phi <= std::max(10.0 * phi0, 1e-22);
        if (!ok_step)
        {
            // divergence safeguard: fall back to a line-searched centering
            // step (constraint data must be restored to the current iterate
            // after the trial evaluation above)
            ws.eval_constraints(st.x, true);
            dir = solve_direction(mu, nullptr);
            if (solve_failed)
            {
                out.status = SolveStatus::NumericalTrouble;
                break;
            }
            const auto ac = fraction_to_boundary(dir, 0.995);
            alpha = std::min(ac.first, ac.second);
            const double phic = merit(st, ws.u, ws.gval, mu);
            bool accepted = false;
            for (int bt = 0; bt < 40; ++bt)
            {
                trial = apply(dir, alpha, alpha);
                ws.eval_constraints(trial.x, true);
                phi = merit(trial, ws.u, ws.gval, mu);
                if (phi <= (1.0 - 0.01 * alpha) * phic || phi < 1e-24)
                {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted || alpha < 1e-6)
                ++bad_steps;
            else
                bad_steps = std::max(0, bad_steps - 1);
        }
        else
            bad_steps = 0;

        if (alpha < 0.1)
            lm_damp = lm_damp == 0.0 ? 1e-8 : std::min(lm_damp * 10.0, 1e8);
        else if (alpha > 0.75)
            lm_damp = lm_damp < 1e-12 ? 0.0 : lm_damp * 0.2;
        st = trial;
    }

    // return the best iterate seen, with an independent feasibility recheck
    if (best_kkt < out.kkt_residual)
    {
        st = best;
        out.kkt_residual = best_kkt;
    }
    ws.eval_constraints(st.x, false);
    double final_pinf = 0.0;
    for (int i = 0; i < m; ++i)
        final_pinf = std::max(final_pinf, ws.gval(i) / ws.cscale(i));
    if (out.status == SolveStatus::Optimal && final_pinf > 50.0 * solver_tol)
        out.status = SolveStatus::NumericalTrouble;

    out.values = st.x;
    out.objective = spec.eval_objective(st.x);
    return out;
}
} // namespace

} // namespace rscran
