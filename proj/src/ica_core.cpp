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

#include "rscran/ica_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rscran
{

void IcaParams::validate() const
{
    if (!(rho1 > 0.0) || !(rho2 > 0.0))
        throw std::invalid_argument("rho1, rho2 must be > 0");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must be in (0,1)");
    if (!(beta_exponent > 0.0 && beta_exponent < 1.0))
        throw std::invalid_argument("betaExponent must be in (0,1) for sum beta = inf");
    if (max_iterations < 1)
        throw std::invalid_argument("maxIterations must be >= 1");
    if (!(xi > 0.0))
        throw std::invalid_argument("xi must be > 0");
}

double IcaParams::initial_theta(const NetworkConfig &config) const
{
    return theta0 > 0.0 ? theta0 : 1e-2 * config.p_max_w();
}

double beta_step(const IcaParams &params, int v)
{
    return 1.0 / std::pow(v + 2.0, params.beta_exponent);
}

double f_theta(double x, double theta)
{
    if (!(theta > 0.0))
        throw std::domain_error("f_theta: theta must be > 0");
    if (x < 0.0)
        throw std::domain_error("f_theta: x must be >= 0");
    return 2.0 / M_PI * std::atan(x / theta);
}

double f_theta_grad(double x, double theta)
{
    if (!(theta > 0.0))
        throw std::domain_error("f_theta_grad: theta must be > 0");
    return 2.0 / M_PI * theta / (theta * theta + x * x);
}

double bilinear_split(double t, double d)
{
    return 0.5 * ((t + d) * (t + d) - t * t - d * d);
}

AffineExpr linearize_ftheta_expr(double anchor_norm_sq, double theta)
{
    const double slope = f_theta_grad(anchor_norm_sq, theta);
    return {slope, f_theta(anchor_norm_sq, theta) - slope * anchor_norm_sq};
}

double linearize_ftheta(const arma::cx_vec &w, const arma::cx_vec &w_anchor, double theta)
{
    const double nsq_anchor = std::pow(arma::norm(w_anchor), 2);
    return linearize_ftheta_expr(nsq_anchor, theta).eval(std::pow(arma::norm(w), 2));
}

AffineExpr linearize_log_expr(double gamma_tilde)
{
    if (!(gamma_tilde > 0.0))
        throw std::domain_error("linearize_log: gamma_tilde must be > 0");
    const double slope = 1.0 / ((1.0 + gamma_tilde) * M_LN2);
    return {slope, std::log2(1.0 + gamma_tilde) - slope * gamma_tilde};
}

double linearize_log(double gamma, double gamma_tilde)
{
    return linearize_log_expr(gamma_tilde).eval(gamma);
}

double qol_lower_bound(const arma::cx_vec &h, const arma::cx_vec &w, double gamma,
                       const arma::cx_vec &w_tilde, double gamma_tilde)
{
    const std::complex<double> z_anchor = arma::cdot(h, w_tilde); // h^H w_tilde
    const std::complex<double> z = arma::cdot(h, w);
    const double cross = 2.0 * (std::conj(z_anchor) * z).real();
    return cross / gamma_tilde - std::norm(z_anchor) * gamma / (gamma_tilde * gamma_tilde);
}

double g2_tilde(const arma::mat &t_p, const arma::mat &t_c, const arma::vec &d_p,
                const arma::vec &d_c, const SurrogatePoint &anchor, int n, double cn_bps,
                double bandwidth_hz)
{
    const bool has_common = anchor.t_c.n_elem > 0;
    double v = -cn_bps / bandwidth_hz;
    auto term = [](double t, double d, double tt, double dt) {
        return 0.5 * (t + d) * (t + d) - 0.5 * tt * tt - 0.5 * dt * dt - tt * (t - tt) -
               dt * (d - dt);
    };
    for (arma::uword k = 0; k < d_p.n_elem; ++k)
    {
        v += term(t_p(n, k), d_p(k), anchor.t_p(n, k), anchor.d_p(k));
        if (has_common)
            v += term(t_c(n, k), d_c(k), anchor.t_c(n, k), anchor.d_c(k));
    }
    return v;
}

double g7_tilde(const ChannelState &h, const CmdSets &cmd, const BeamformerSet &w,
                double gamma_pk, const SurrogatePoint &anchor, int k, double sigma2_w)
{
    const int num_users = static_cast<int>(h.h.n_cols);
    double v = sigma2_w;
    for (int j = 0; j < num_users; ++j)
        if (j != k)
            v += std::norm(arma::cdot(h.h.col(k), w.wp.col(j)));
    if (w.wc.n_elem > 0)
        for (int l = 0; l < num_users; ++l)
            if (!cmd.in_phi(k, l))
                v += std::norm(arma::cdot(h.h.col(k), w.wc.col(l)));
    v -= qol_lower_bound(h.h.col(k), w.wp.col(k), gamma_pk, anchor.w.wp.col(k),
                         anchor.gamma_p(k));
    return v;
}

double g8_tilde(const ChannelState &h, const CmdSets &cmd, const BeamformerSet &w,
                double gamma_ck, const SurrogatePoint &anchor, int owner, int decoder,
                double sigma2_w)
{
    const int pos_owner = cmd.phi_position(decoder, owner);
    if (pos_owner < 0)
        throw std::invalid_argument("g8_tilde: decoder is not in m[owner]");

    const int num_users = static_cast<int>(h.h.n_cols);
    double v = sigma2_w;
    for (int j = 0; j < num_users; ++j)
        v += std::norm(arma::cdot(h.h.col(decoder), w.wp.col(j)));
    for (int l = 0; l < num_users; ++l)
        if (!cmd.in_phi(decoder, l))
            v += std::norm(arma::cdot(h.h.col(decoder), w.wc.col(l)));
    const auto &order = cmd.phi[decoder];
    for (int pos = pos_owner + 1; pos < static_cast<int>(order.size()); ++pos)
        v += std::norm(arma::cdot(h.h.col(decoder), w.wc.col(order[pos])));
    v -= qol_lower_bound(h.h.col(decoder), w.wc.col(owner), gamma_ck, anchor.w.wc.col(owner),
                         anchor.gamma_c(owner));
    return v;
}

double g9_prox(const BeamformerSet &w, const arma::vec &gamma_p, const arma::vec &gamma_c,
               const SurrogatePoint &anchor, double rho1, double rho2)
{
    double v = rho1 * std::pow(arma::norm(w.wp - anchor.w.wp, "fro"), 2);
    if (w.wc.n_elem > 0 && anchor.w.wc.n_elem > 0)
        v += rho1 * std::pow(arma::norm(w.wc - anchor.w.wc, "fro"), 2);
    v += rho2 * std::pow(arma::norm(gamma_p - anchor.gamma_p), 2);
    if (gamma_c.n_elem > 0 && anchor.gamma_c.n_elem > 0)
        v += rho2 * std::pow(arma::norm(gamma_c - anchor.gamma_c), 2);
    return v;
}

namespace
{

// Incremental layout/constraint builder shared by both assemblers
struct SpecBuilder
{
    SubproblemSpec spec;
    int offset = 0;

    int add_wblock(int user, bool common, arma::uvec rows)
    {
        WBlockInfo b;
        b.user = user;
        b.common = common;
        b.rows = std::move(rows);
        b.offset = offset;
        b.dim = 2 * static_cast<int>(b.rows.n_elem);
        offset += b.dim;
        spec.wblocks.push_back(std::move(b));
        return static_cast<int>(spec.wblocks.size()) - 1;
    }

    int add_scalar()
    {
        return offset++;
    }

    void finalize_layout()
    {
        spec.n = offset;
        spec.lb.set_size(spec.n);
        spec.ub.set_size(spec.n);
        spec.lb.fill(-arma::datum::inf);
        spec.ub.fill(arma::datum::inf);
        spec.obj_lin.zeros(spec.n);
        spec.obj_quad_diag.zeros(spec.n);
        spec.x0.zeros(spec.n);
    }
};

// Sparse accumulation helper for linear parts
void emit_lin(std::map<int, double> &acc, SparseLin &out)
{
    out.assign(acc.begin(), acc.end());
    acc.clear();
}

// Coordinates of BS n inside a block (real and imaginary parts)
arma::uvec bs_coords_in_block(const WBlockInfo &b, int n, int antennas)
{
    std::vector<arma::uword> coords;
    const int r = static_cast<int>(b.rows.n_elem);
    for (int i = 0; i < r; ++i)
    {
        if (static_cast<int>(b.rows(i)) / antennas == n)
        {
            coords.push_back(b.offset + i);
            coords.push_back(b.offset + r + i);
        }
    }
    return arma::uvec(coords);
}

// QoL linear part: -(2/gamma_tilde) Re{w_tilde^H h h^H w} as entries over the
// block's real layout, plus the gamma coefficient |h^H w_tilde|^2/gamma_tilde^2.
// Returns the anchor signal level |h^H w_tilde|^2/gamma_tilde, the natural
// magnitude of the whole constraint, used to equilibrate its row.
double add_qol_terms(const SubproblemSpec &spec, int block, const arma::cx_vec &h_masked,
                     const arma::cx_vec &w_anchor_masked, double gamma_tilde, int gamma_idx,
                     std::map<int, double> &lin)
{
    const WBlockInfo &b = spec.wblocks[block];
    const int r = static_cast<int>(b.rows.n_elem);
    const std::complex<double> z_anchor = arma::cdot(h_masked, w_anchor_masked);
    const double a = z_anchor.real(), bb = z_anchor.imag();
    const double c = -2.0 / gamma_tilde;
    // Re{conj(z_anchor) (h^H w)} = a*(u1.x) + bb*(u2.x) with
    // u1 = [Re h; Im h], u2 = [-Im h; Re h]
    for (int i = 0; i < r; ++i)
    {
        const double hr = h_masked(i).real(), hi = h_masked(i).imag();
        lin[b.offset + i] += c * (a * hr - bb * hi);
        lin[b.offset + r + i] += c * (a * hi + bb * hr);
    }
    lin[gamma_idx] += std::norm(z_anchor) / (gamma_tilde * gamma_tilde);
    return std::norm(z_anchor) / gamma_tilde;
}

// Divide every coefficient of a constraint by the given row scale
void equilibrate(Constraint &c, double scale)
{
    if (!(scale > 0.0))
        return;
    const double inv = 1.0 / scale;
    for (auto &t : c.rank1)
        t.coeff *= inv;
    for (auto &t : c.diag)
        t.coeff *= inv;
    for (auto &t : c.pairs)
        t.coeff *= inv;
    for (auto &[idx, val] : c.lin)
        val *= inv;
    c.constant *= inv;
}

double anchor_block_norm_sq(const arma::cx_mat &w, int n, int antennas, int k)
{
    const arma::uword lo = static_cast<arma::uword>(n) * antennas;
    return std::pow(arma::norm(w.col(k).subvec(lo, lo + antennas - 1)), 2);
}

void check_anchor_feasible(const SubproblemSpec &spec, const NetworkConfig &config)
{
    (void)config;
    for (const auto &c : spec.constraints)
    {
        // rows are equilibrated to O(1) scale at assembly; the threshold
        // tolerates solver dust on warm anchors and catches gross bugs
        const double v = spec.eval_constraint(c, spec.x0);
        if (v > 1e-3 * (1.0 + std::abs(c.constant)))
            throw std::runtime_error("assemble: anchor infeasible for surrogate constraint "
                                     "(family " +
                                     std::to_string(static_cast<int>(c.family)) +
                                     ", violation " + std::to_string(v) + ")");
    }
}

} // namespace

SubproblemSpec assemble_opt6(const ChannelState &h, const CmdSets &cmd,
                             const SurrogatePoint &anchor, const IcaParams &params,
                             const NetworkConfig &config, double theta, bool include_common,
                             const arma::vec &weights)
{
    config.validate();
    params.validate();
    const int num_users = config.num_users;
    const int num_bs = config.num_bs;
    const int l = config.antennas_per_bs;
    const arma::uword nl = static_cast<arma::uword>(num_bs) * l;
    const double sigma = std::sqrt(config.noise_power_w());
    const arma::cx_mat hn = h.h / sigma; // unit-noise channels
    const double cn_over_b = config.backhaul_bps() / config.bandwidth_hz;

    SpecBuilder bld;
    SubproblemSpec &spec = bld.spec;
    spec.num_users = num_users;
    spec.num_bs = num_bs;
    spec.antennas = l;
    spec.include_common = include_common;

    std::vector<bool> alive_p(num_users), alive_c(num_users, false);
    for (int k = 0; k < num_users; ++k)
    {
        alive_p[k] = anchor.gamma_p(k) >= params.gamma_anchor_floor;
        if (include_common)
            alive_c[k] = anchor.gamma_c(k) >= params.gamma_anchor_floor;
    }

    const arma::uvec all_rows = arma::regspace<arma::uvec>(0, nl - 1);
    spec.wp_block.assign(num_users, -1);
    spec.wc_block.assign(num_users, -1);
    for (int k = 0; k < num_users; ++k)
        spec.wp_block[k] = bld.add_wblock(k, false, all_rows);
    if (include_common)
        for (int k = 0; k < num_users; ++k)
            spec.wc_block[k] = bld.add_wblock(k, true, all_rows);

    spec.gp_idx.assign(num_users, -1);
    spec.gc_idx.assign(num_users, -1);
    for (int k = 0; k < num_users; ++k)
        if (alive_p[k])
            spec.gp_idx[k] = bld.add_scalar();
    if (include_common)
        for (int k = 0; k < num_users; ++k)
            if (alive_c[k])
                spec.gc_idx[k] = bld.add_scalar();

    // per-(BS, user) transmit-power slacks p >= |w_nk|^2 turn the power and
    // f_theta rows into affine ones (the SOC reduction of the subproblem)
    spec.pp_idx.set_size(num_bs, num_users);
    spec.pc_idx.set_size(num_bs, num_users);
    spec.pp_idx.fill(-1);
    spec.pc_idx.fill(-1);
    for (int n = 0; n < num_bs; ++n)
        for (int k = 0; k < num_users; ++k)
            spec.pp_idx(n, k) = bld.add_scalar();
    if (include_common)
        for (int n = 0; n < num_bs; ++n)
            for (int k = 0; k < num_users; ++k)
                spec.pc_idx(n, k) = bld.add_scalar();

    spec.td_begin = bld.offset;
    spec.tp_idx.set_size(num_bs, num_users);
    spec.tc_idx.set_size(num_bs, num_users);
    spec.tp_idx.fill(-1);
    spec.tc_idx.fill(-1);
    for (int n = 0; n < num_bs; ++n)
        for (int k = 0; k < num_users; ++k)
            spec.tp_idx(n, k) = bld.add_scalar();
    if (include_common)
        for (int n = 0; n < num_bs; ++n)
            for (int k = 0; k < num_users; ++k)
                spec.tc_idx(n, k) = bld.add_scalar();
    spec.dp_idx.assign(num_users, -1);
    spec.dc_idx.assign(num_users, -1);
    for (int k = 0; k < num_users; ++k)
        spec.dp_idx[k] = bld.add_scalar();
    if (include_common)
        for (int k = 0; k < num_users; ++k)
            spec.dc_idx[k] = bld.add_scalar();
    spec.td_count = bld.offset - spec.td_begin;

    bld.finalize_layout();

    // Bounds, plus a tiny objective pressure that pins the otherwise
    // objective-free t/d slacks at their lower envelopes (the backhaul-
    // inactive case leaves them degenerate without it)
    const double td_pressure = 1e-5;
    for (int k = 0; k < num_users; ++k)
    {
        if (spec.gp_idx[k] >= 0)
            spec.lb(spec.gp_idx[k]) = params.gamma_floor;
        if (spec.gc_idx[k] >= 0)
            spec.lb(spec.gc_idx[k]) = params.gamma_floor;
        spec.lb(spec.dp_idx[k]) = 0.0;
        spec.obj_lin(spec.dp_idx[k]) -= td_pressure;
        if (spec.dc_idx[k] >= 0)
        {
            spec.lb(spec.dc_idx[k]) = 0.0;
            spec.obj_lin(spec.dc_idx[k]) -= td_pressure;
        }
        for (int n = 0; n < num_bs; ++n)
        {
            spec.lb(spec.tp_idx(n, k)) = 0.0;
            spec.ub(spec.tp_idx(n, k)) = 1.0;
            spec.obj_lin(spec.tp_idx(n, k)) -= td_pressure;
            spec.lb(spec.pp_idx(n, k)) = 0.0;
            spec.obj_lin(spec.pp_idx(n, k)) -= td_pressure;
            if (spec.tc_idx(n, k) >= 0)
            {
                spec.lb(spec.tc_idx(n, k)) = 0.0;
                spec.ub(spec.tc_idx(n, k)) = 1.0;
                spec.obj_lin(spec.tc_idx(n, k)) -= td_pressure;
            }
            if (spec.pc_idx(n, k) >= 0)
            {
                spec.lb(spec.pc_idx(n, k)) = 0.0;
                spec.obj_lin(spec.pc_idx(n, k)) -= td_pressure;
            }
        }
    }

    // Objective: weighted linearized logs minus proximal terms
    auto add_w_prox = [&](int block, const arma::cx_vec &w_anchor) {
        const WBlockInfo &b = spec.wblocks[block];
        const int r = static_cast<int>(b.rows.n_elem);
        for (int i = 0; i < r; ++i)
        {
            spec.obj_quad_diag(b.offset + i) += 2.0 * params.rho1;
            spec.obj_quad_diag(b.offset + r + i) += 2.0 * params.rho1;
            spec.obj_lin(b.offset + i) += 2.0 * params.rho1 * w_anchor(i).real();
            spec.obj_lin(b.offset + r + i) += 2.0 * params.rho1 * w_anchor(i).imag();
        }
        spec.obj_const -= params.rho1 * std::pow(arma::norm(w_anchor), 2);
    };
    for (int k = 0; k < num_users; ++k)
    {
        add_w_prox(spec.wp_block[k], anchor.w.wp.col(k));
        if (spec.wc_block[k] >= 0)
            add_w_prox(spec.wc_block[k], anchor.w.wc.col(k));

        auto add_gamma_obj = [&](int idx, double gamma_anchor) {
            if (idx < 0)
            {
                spec.obj_const += weights(k) * std::log2(1.0 + params.gamma_floor);
                return;
            }
            const AffineExpr ll = linearize_log_expr(gamma_anchor);
            spec.obj_lin(idx) += weights(k) * ll.slope;
            spec.obj_const += weights(k) * ll.intercept;
            spec.obj_quad_diag(idx) += 2.0 * params.rho2;
            spec.obj_lin(idx) += 2.0 * params.rho2 * gamma_anchor;
            spec.obj_const -= params.rho2 * gamma_anchor * gamma_anchor;
        };
        add_gamma_obj(spec.gp_idx[k], anchor.gamma_p(k));
        if (include_common)
            add_gamma_obj(spec.gc_idx[k], anchor.gamma_c(k));
    }

    // Anchor in layout coordinates
    for (int k = 0; k < num_users; ++k)
    {
        spec.set_w(spec.x0, spec.wp_block[k], anchor.w.wp.col(k));
        if (spec.wc_block[k] >= 0)
            spec.set_w(spec.x0, spec.wc_block[k], anchor.w.wc.col(k));
        if (spec.gp_idx[k] >= 0)
            spec.x0(spec.gp_idx[k]) = anchor.gamma_p(k);
        if (spec.gc_idx[k] >= 0)
            spec.x0(spec.gc_idx[k]) = anchor.gamma_c(k);
        spec.x0(spec.dp_idx[k]) = anchor.d_p(k);
        if (spec.dc_idx[k] >= 0)
            spec.x0(spec.dc_idx[k]) = anchor.d_c(k);
        for (int n = 0; n < num_bs; ++n)
        {
            spec.x0(spec.tp_idx(n, k)) = std::clamp(anchor.t_p(n, k), 0.0, 1.0);
            if (spec.tc_idx(n, k) >= 0)
                spec.x0(spec.tc_idx(n, k)) = std::clamp(anchor.t_c(n, k), 0.0, 1.0);
            spec.x0(spec.pp_idx(n, k)) = anchor_block_norm_sq(anchor.w.wp, n, l, k);
            if (spec.pc_idx(n, k) >= 0)
                spec.x0(spec.pc_idx(n, k)) = anchor_block_norm_sq(anchor.w.wc, n, l, k);
        }
    }

    std::map<int, double> lin;

    // Block power epigraphs |w_nk|^2 <= p_nk
    for (int k = 0; k < num_users; ++k)
        for (int n = 0; n < num_bs; ++n)
        {
            {
                Constraint c;
                c.family = ConstraintFamily::NormEpigraph;
                c.tag_a = n;
                c.tag_b = k;
                c.diag.push_back(
                    {bs_coords_in_block(spec.wblocks[spec.wp_block[k]], n, l), 1.0});
                c.lin = {{static_cast<int>(spec.pp_idx(n, k)), -1.0}};
                spec.constraints.push_back(std::move(c));
            }
            if (include_common)
            {
                Constraint c;
                c.family = ConstraintFamily::NormEpigraph;
                c.tag_a = n;
                c.tag_b = num_users + k;
                c.diag.push_back(
                    {bs_coords_in_block(spec.wblocks[spec.wc_block[k]], n, l), 1.0});
                c.lin = {{static_cast<int>(spec.pc_idx(n, k)), -1.0}};
                spec.constraints.push_back(std::move(c));
            }
        }

    // Per-BS power, affine in the block power slacks
    for (int n = 0; n < num_bs; ++n)
    {
        Constraint c;
        c.family = ConstraintFamily::Power;
        c.tag_a = n;
        c.constant = -config.p_max_w();
        for (int k = 0; k < num_users; ++k)
        {
            lin[spec.pp_idx(n, k)] += 1.0;
            if (spec.pc_idx(n, k) >= 0)
                lin[spec.pc_idx(n, k)] += 1.0;
        }
        emit_lin(lin, c.lin);
        equilibrate(c, config.p_max_w());
        spec.constraints.push_back(std::move(c));
    }

    // Convexified bilinear backhaul budget
    for (int n = 0; n < num_bs; ++n)
    {
        Constraint c;
        c.family = ConstraintFamily::BackhaulBilinear;
        c.tag_a = n;
        c.constant = -cn_over_b;
        for (int k = 0; k < num_users; ++k)
        {
            c.pairs.push_back({static_cast<int>(spec.tp_idx(n, k)), spec.dp_idx[k], 0.5});
            lin[spec.tp_idx(n, k)] += -anchor.t_p(n, k);
            lin[spec.dp_idx[k]] += -anchor.d_p(k);
            c.constant += 0.5 * (anchor.t_p(n, k) * anchor.t_p(n, k) +
                                 anchor.d_p(k) * anchor.d_p(k));
            if (include_common)
            {
                c.pairs.push_back({static_cast<int>(spec.tc_idx(n, k)), spec.dc_idx[k], 0.5});
                lin[spec.tc_idx(n, k)] += -anchor.t_c(n, k);
                lin[spec.dc_idx[k]] += -anchor.d_c(k);
                c.constant += 0.5 * (anchor.t_c(n, k) * anchor.t_c(n, k) +
                                     anchor.d_c(k) * anchor.d_c(k));
            }
        }
        emit_lin(lin, c.lin);
        equilibrate(c, std::max(1.0, cn_over_b));
        spec.constraints.push_back(std::move(c));
    }

    // Linearized f_theta vs t slacks, affine through the power slacks
    for (int k = 0; k < num_users; ++k)
        for (int n = 0; n < num_bs; ++n)
        {
            {
                Constraint c;
                c.family = ConstraintFamily::FthetaPrivate;
                c.tag_a = n;
                c.tag_b = k;
                const AffineExpr e =
                    linearize_ftheta_expr(anchor_block_norm_sq(anchor.w.wp, n, l, k), theta);
                c.lin = {{static_cast<int>(spec.pp_idx(n, k)), e.slope},
                         {static_cast<int>(spec.tp_idx(n, k)), -1.0}};
                c.constant = e.intercept;
                spec.constraints.push_back(std::move(c));
            }
            if (include_common)
            {
                Constraint c;
                c.family = ConstraintFamily::FthetaCommon;
                c.tag_a = n;
                c.tag_b = k;
                const AffineExpr e =
                    linearize_ftheta_expr(anchor_block_norm_sq(anchor.w.wc, n, l, k), theta);
                c.lin = {{static_cast<int>(spec.pc_idx(n, k)), e.slope},
                         {static_cast<int>(spec.tc_idx(n, k)), -1.0}};
                c.constant = e.intercept;
                spec.constraints.push_back(std::move(c));
            }
        }

    // Linearized logs vs d slacks
    for (int k = 0; k < num_users; ++k)
    {
        auto add_log_link = [&](ConstraintFamily fam, int gamma_idx, double gamma_anchor,
                                int d_idx) {
            Constraint c;
            c.family = fam;
            c.tag_a = k;
            const double ga = gamma_idx >= 0 ? gamma_anchor : params.gamma_floor;
            const AffineExpr e = linearize_log_expr(ga);
            if (gamma_idx >= 0)
            {
                c.lin = {{gamma_idx, e.slope}, {d_idx, -1.0}};
                c.constant = e.intercept;
            }
            else
            {
                c.lin = {{d_idx, -1.0}};
                c.constant = e.eval(params.gamma_floor);
            }
            spec.constraints.push_back(std::move(c));
        };
        add_log_link(ConstraintFamily::LogPrivate, spec.gp_idx[k], anchor.gamma_p(k),
                     spec.dp_idx[k]);
        if (include_common)
            add_log_link(ConstraintFamily::LogCommon, spec.gc_idx[k],
                         include_common ? anchor.gamma_c(k) : 0.0, spec.dc_idx[k]);
    }

    // QoL-bounded private SINR
    for (int k = 0; k < num_users; ++k)
    {
        if (spec.gp_idx[k] < 0)
            continue;
        Constraint c;
        c.family = ConstraintFamily::SinrPrivate;
        c.tag_a = k;
        c.constant = 1.0; // unit noise
        for (int j = 0; j < num_users; ++j)
            if (j != k)
                c.rank1.push_back({spec.wp_block[j], hn.col(k), 1.0});
        if (include_common)
            for (int lu = 0; lu < num_users; ++lu)
                if (!cmd.in_phi(k, lu))
                    c.rank1.push_back({spec.wc_block[lu], hn.col(k), 1.0});
        const double row_scale =
            add_qol_terms(spec, spec.wp_block[k], hn.col(k), anchor.w.wp.col(k),
                          anchor.gamma_p(k), spec.gp_idx[k], lin);
        emit_lin(lin, c.lin);
        equilibrate(c, std::max(1.0, row_scale));
        spec.constraints.push_back(std::move(c));
    }

    // QoL-bounded common SINR per (owner, decoder)
    if (include_common)
        for (int owner = 0; owner < num_users; ++owner)
        {
            if (spec.gc_idx[owner] < 0)
                continue;
            for (int dec : cmd.m[owner])
            {
                Constraint c;
                c.family = ConstraintFamily::SinrCommon;
                c.tag_a = owner;
                c.tag_b = dec;
                c.constant = 1.0;
                for (int j = 0; j < num_users; ++j)
                    c.rank1.push_back({spec.wp_block[j], hn.col(dec), 1.0});
                for (int lu = 0; lu < num_users; ++lu)
                    if (!cmd.in_phi(dec, lu))
                        c.rank1.push_back({spec.wc_block[lu], hn.col(dec), 1.0});
                const auto &order = cmd.phi[dec];
                const int pos_owner = cmd.phi_position(dec, owner);
                for (int pos = pos_owner + 1; pos < static_cast<int>(order.size()); ++pos)
                    c.rank1.push_back({spec.wc_block[order[pos]], hn.col(dec), 1.0});
                const double row_scale =
                    add_qol_terms(spec, spec.wc_block[owner], hn.col(dec),
                                  anchor.w.wc.col(owner), anchor.gamma_c(owner),
                                  spec.gc_idx[owner], lin);
                emit_lin(lin, c.lin);
                equilibrate(c, std::max(1.0, row_scale));
                spec.constraints.push_back(std::move(c));
            }
        }

    check_anchor_feasible(spec, config);
    return spec;
}

SubproblemSpec assemble_opt7(const ChannelState &h, const CmdSets &cmd,
                             const ClusterAssignment &clusters, const SurrogatePoint &anchor,
                             const IcaParams &params, const NetworkConfig &config,
                             bool include_common, const arma::vec &weights,
                             std::vector<int> *unserved)
{
    config.validate();
    params.validate();
    const int num_users = config.num_users;
    const int num_bs = config.num_bs;
    const int l = config.antennas_per_bs;
    const double sigma = std::sqrt(config.noise_power_w());
    const arma::cx_mat hn = h.h / sigma;
    const double cn_over_b = config.backhaul_bps() / config.bandwidth_hz;

    SpecBuilder bld;
    SubproblemSpec &spec = bld.spec;
    spec.num_users = num_users;
    spec.num_bs = num_bs;
    spec.antennas = l;
    spec.include_common = include_common;

    auto cluster_rows = [&](const std::vector<int> &bs_list) {
        std::vector<arma::uword> rows;
        for (int n : bs_list)
            for (int a = 0; a < l; ++a)
                rows.push_back(static_cast<arma::uword>(n) * l + a);
        return arma::uvec(rows);
    };

    spec.wp_block.assign(num_users, -1);
    spec.wc_block.assign(num_users, -1);
    std::vector<bool> alive_p(num_users, false), alive_c(num_users, false);
    for (int k = 0; k < num_users; ++k)
    {
        const auto bs_p = clusters.private_cluster_of(k);
        if (!bs_p.empty())
        {
            spec.wp_block[k] = bld.add_wblock(k, false, cluster_rows(bs_p));
            alive_p[k] = anchor.gamma_p(k) >= params.gamma_anchor_floor;
        }
        else if (unserved && weights(k) > 0.0)
            unserved->push_back(k);
    }
    if (include_common)
        for (int k = 0; k < num_users; ++k)
        {
            const auto bs_c = clusters.common_cluster_of(k);
            if (!bs_c.empty())
            {
                spec.wc_block[k] = bld.add_wblock(k, true, cluster_rows(bs_c));
                alive_c[k] = anchor.gamma_c(k) >= params.gamma_anchor_floor;
            }
        }

    spec.gp_idx.assign(num_users, -1);
    spec.gc_idx.assign(num_users, -1);
    for (int k = 0; k < num_users; ++k)
        if (alive_p[k])
            spec.gp_idx[k] = bld.add_scalar();
    for (int k = 0; k < num_users; ++k)
        if (alive_c[k])
            spec.gc_idx[k] = bld.add_scalar();

    spec.td_begin = bld.offset;
    spec.td_count = 0;
    spec.tp_idx.set_size(0, 0);
    spec.tc_idx.set_size(0, 0);
    spec.pp_idx.set_size(0, 0);
    spec.pc_idx.set_size(0, 0);
    spec.dp_idx.assign(num_users, -1);
    spec.dc_idx.assign(num_users, -1);

    bld.finalize_layout();

    for (int k = 0; k < num_users; ++k)
    {
        if (spec.gp_idx[k] >= 0)
            spec.lb(spec.gp_idx[k]) = params.gamma_floor;
        if (spec.gc_idx[k] >= 0)
            spec.lb(spec.gc_idx[k]) = params.gamma_floor;
    }

    auto masked = [&](const arma::cx_mat &w, int block) {
        return arma::cx_vec(w.col(spec.wblocks[block].user)).elem(spec.wblocks[block].rows);
    };

    // Objective
    for (int k = 0; k < num_users; ++k)
    {
        auto add_w_prox = [&](int block, const arma::cx_mat &w_anchor) {
            if (block < 0)
                return;
            const WBlockInfo &b = spec.wblocks[block];
            const int r = static_cast<int>(b.rows.n_elem);
            const arma::cx_vec wa = arma::cx_vec(w_anchor.col(k)).elem(b.rows);
            for (int i = 0; i < r; ++i)
            {
                spec.obj_quad_diag(b.offset + i) += 2.0 * params.rho1;
                spec.obj_quad_diag(b.offset + r + i) += 2.0 * params.rho1;
                spec.obj_lin(b.offset + i) += 2.0 * params.rho1 * wa(i).real();
                spec.obj_lin(b.offset + r + i) += 2.0 * params.rho1 * wa(i).imag();
            }
            spec.obj_const -= params.rho1 * std::pow(arma::norm(wa), 2);
        };
        add_w_prox(spec.wp_block[k], anchor.w.wp);
        add_w_prox(spec.wc_block[k], anchor.w.wc);

        auto add_gamma_obj = [&](int idx, double gamma_anchor) {
            if (idx < 0)
            {
                spec.obj_const += weights(k) * std::log2(1.0 + params.gamma_floor);
                return;
            }
            const AffineExpr ll = linearize_log_expr(gamma_anchor);
            spec.obj_lin(idx) += weights(k) * ll.slope;
            spec.obj_const += weights(k) * ll.intercept;
            spec.obj_quad_diag(idx) += 2.0 * params.rho2;
            spec.obj_lin(idx) += 2.0 * params.rho2 * gamma_anchor;
            spec.obj_const -= params.rho2 * gamma_anchor * gamma_anchor;
        };
        add_gamma_obj(spec.gp_idx[k], anchor.gamma_p(k));
        if (include_common && spec.wc_block[k] >= 0)
            add_gamma_obj(spec.gc_idx[k], anchor.gamma_c(k));
    }

    // Anchor
    for (int k = 0; k < num_users; ++k)
    {
        if (spec.wp_block[k] >= 0)
        {
            const arma::cx_vec wa = masked(anchor.w.wp, spec.wp_block[k]);
            spec.set_w(spec.x0, spec.wp_block[k], wa);
        }
        if (spec.wc_block[k] >= 0)
        {
            const arma::cx_vec wa = masked(anchor.w.wc, spec.wc_block[k]);
            spec.set_w(spec.x0, spec.wc_block[k], wa);
        }
        if (spec.gp_idx[k] >= 0)
            spec.x0(spec.gp_idx[k]) = anchor.gamma_p(k);
        if (spec.gc_idx[k] >= 0)
            spec.x0(spec.gc_idx[k]) = anchor.gamma_c(k);
    }

    std::map<int, double> lin;

    // Per-BS power over cluster members only (other coords do not exist)
    for (int n = 0; n < num_bs; ++n)
    {
        Constraint c;
        c.family = ConstraintFamily::Power;
        c.tag_a = n;
        c.constant = -config.p_max_w();
        for (int b = 0; b < static_cast<int>(spec.wblocks.size()); ++b)
        {
            arma::uvec coords = bs_coords_in_block(spec.wblocks[b], n, l);
            if (coords.n_elem > 0)
                c.diag.push_back({std::move(coords), 1.0});
        }
        equilibrate(c, config.p_max_w());
        spec.constraints.push_back(std::move(c));
    }

    // Affine backhaul over fixed clusters (g10)
    for (int n = 0; n < num_bs; ++n)
    {
        Constraint c;
        c.family = ConstraintFamily::BackhaulCluster;
        c.tag_a = n;
        c.constant = -cn_over_b;
        auto add_member = [&](int gamma_idx, double gamma_anchor) {
            if (gamma_idx >= 0)
            {
                const AffineExpr e = linearize_log_expr(gamma_anchor);
                lin[gamma_idx] += e.slope;
                c.constant += e.intercept;
            }
            else
                c.constant += std::log2(1.0 + params.gamma_floor);
        };
        for (int k : clusters.kp[n])
            if (spec.wp_block[k] >= 0)
                add_member(spec.gp_idx[k], anchor.gamma_p(k));
        if (include_common)
            for (int k : clusters.kc[n])
                if (spec.wc_block[k] >= 0)
                    add_member(spec.gc_idx[k], anchor.gamma_c(k));
        emit_lin(lin, c.lin);
        equilibrate(c, std::max(1.0, cn_over_b));
        spec.constraints.push_back(std::move(c));
    }

    // QoL-bounded private SINR
    for (int k = 0; k < num_users; ++k)
    {
        if (spec.gp_idx[k] < 0)
            continue;
        Constraint c;
        c.family = ConstraintFamily::SinrPrivate;
        c.tag_a = k;
        c.constant = 1.0;
        for (int j = 0; j < num_users; ++j)
            if (j != k && spec.wp_block[j] >= 0)
                c.rank1.push_back({spec.wp_block[j],
                                   arma::cx_vec(hn.col(k)).elem(spec.wblocks[spec.wp_block[j]].rows),
                                   1.0});
        if (include_common)
            for (int lu = 0; lu < num_users; ++lu)
                if (!cmd.in_phi(k, lu) && spec.wc_block[lu] >= 0)
                    c.rank1.push_back(
                        {spec.wc_block[lu],
                         arma::cx_vec(hn.col(k)).elem(spec.wblocks[spec.wc_block[lu]].rows),
                         1.0});
        const arma::uvec &rows_k = spec.wblocks[spec.wp_block[k]].rows;
        const double row_scale =
            add_qol_terms(spec, spec.wp_block[k], arma::cx_vec(hn.col(k)).elem(rows_k),
                          masked(anchor.w.wp, spec.wp_block[k]), anchor.gamma_p(k),
                          spec.gp_idx[k], lin);
        emit_lin(lin, c.lin);
        equilibrate(c, std::max(1.0, row_scale));
        spec.constraints.push_back(std::move(c));
    }

    // QoL-bounded common SINR
    if (include_common)
        for (int owner = 0; owner < num_users; ++owner)
        {
            if (spec.gc_idx[owner] < 0)
                continue;
            for (int dec : cmd.m[owner])
            {
                Constraint c;
                c.family = ConstraintFamily::SinrCommon;
                c.tag_a = owner;
                c.tag_b = dec;
                c.constant = 1.0;
                for (int j = 0; j < num_users; ++j)
                    if (spec.wp_block[j] >= 0)
                        c.rank1.push_back(
                            {spec.wp_block[j],
                             arma::cx_vec(hn.col(dec)).elem(spec.wblocks[spec.wp_block[j]].rows),
                             1.0});
                for (int lu = 0; lu < num_users; ++lu)
                    if (!cmd.in_phi(dec, lu) && spec.wc_block[lu] >= 0)
                        c.rank1.push_back(
                            {spec.wc_block[lu],
                             arma::cx_vec(hn.col(dec)).elem(spec.wblocks[spec.wc_block[lu]].rows),
                             1.0});
                const auto &order = cmd.phi[dec];
                const int pos_owner = cmd.phi_position(dec, owner);
                for (int pos = pos_owner + 1; pos < static_cast<int>(order.size()); ++pos)
                {
                    const int m_user = order[pos];
                    if (spec.wc_block[m_user] >= 0)
                        c.rank1.push_back(
                            {spec.wc_block[m_user],
                             arma::cx_vec(hn.col(dec)).elem(spec.wblocks[spec.wc_block[m_user]].rows),
                             1.0});
                }
                const arma::uvec &rows_o = spec.wblocks[spec.wc_block[owner]].rows;
                const double row_scale = add_qol_terms(
                    spec, spec.wc_block[owner], arma::cx_vec(hn.col(dec)).elem(rows_o),
                    masked(anchor.w.wc, spec.wc_block[owner]), anchor.gamma_c(owner),
                    spec.gc_idx[owner], lin);
                emit_lin(lin, c.lin);
                equilibrate(c, std::max(1.0, row_scale));
                spec.constraints.push_back(std::move(c));
            }
        }

    check_anchor_feasible(spec, config);
    return spec;
}

SurrogatePoint unpack_solution(const SubproblemSpec &spec, const arma::vec &x,
                               const IcaParams &params)
{
    const int num_users = spec.num_users;
    const arma::uword nl = static_cast<arma::uword>(spec.num_bs) * spec.antennas;
    SurrogatePoint p;
    p.w = BeamformerSet::zeros(nl, num_users);
    p.gamma_p.set_size(num_users);
    p.gamma_p.fill(params.gamma_floor);
    const bool has_common = spec.include_common;
    if (has_common)
    {
        p.gamma_c.set_size(num_users);
        p.gamma_c.fill(params.gamma_floor);
    }

    for (int k = 0; k < num_users; ++k)
    {
        if (spec.wp_block[k] >= 0)
        {
            const WBlockInfo &b = spec.wblocks[spec.wp_block[k]];
            arma::cx_vec w = spec.get_w(x, spec.wp_block[k]);
            for (arma::uword i = 0; i < b.rows.n_elem; ++i)
                p.w.wp(b.rows(i), k) = w(i);
        }
        if (spec.wc_block[k] >= 0)
        {
            const WBlockInfo &b = spec.wblocks[spec.wc_block[k]];
            arma::cx_vec w = spec.get_w(x, spec.wc_block[k]);
            for (arma::uword i = 0; i < b.rows.n_elem; ++i)
                p.w.wc(b.rows(i), k) = w(i);
        }
        if (spec.gp_idx[k] >= 0)
            p.gamma_p(k) = x(spec.gp_idx[k]);
        if (has_common && spec.gc_idx[k] >= 0)
            p.gamma_c(k) = x(spec.gc_idx[k]);
    }

    if (spec.td_count > 0)
    {
        p.t_p.zeros(spec.num_bs, num_users);
        p.d_p.zeros(num_users);
        if (spec.tc_idx.n_elem > 0)
        {
            p.t_c.zeros(spec.num_bs, num_users);
            p.d_c.zeros(num_users);
        }
        for (int k = 0; k < num_users; ++k)
        {
            p.d_p(k) = x(spec.dp_idx[k]);
            if (spec.dc_idx[k] >= 0)
                p.d_c(k) = x(spec.dc_idx[k]);
            for (int n = 0; n < spec.num_bs; ++n)
            {
                p.t_p(n, k) = x(spec.tp_idx(n, k));
                if (spec.tc_idx.n_elem > 0 && spec.tc_idx(n, k) >= 0)
                    p.t_c(n, k) = x(spec.tc_idx(n, k));
            }
        }
    }
    return p;
}

SurrogatePoint step_update(const SurrogatePoint &anchor, const SurrogatePoint &solution,
                           double beta)
{
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("step_update: beta must be in (0,1]");
    if (beta == 1.0)
    {
        SurrogatePoint p = solution;
        if (anchor.w.wc.n_elem > 0 && solution.w.wc.n_elem == 0)
            p.w.wc = anchor.w.wc;
        return p;
    }
    SurrogatePoint p;
    p.w.wp = anchor.w.wp + beta * (solution.w.wp - anchor.w.wp);
    if (anchor.w.wc.n_elem > 0)
        p.w.wc = anchor.w.wc + beta * (solution.w.wc - anchor.w.wc);
    else
        p.w.wc = anchor.w.wc;
    p.gamma_p = anchor.gamma_p + beta * (solution.gamma_p - anchor.gamma_p);
    if (anchor.gamma_c.n_elem > 0)
        p.gamma_c = anchor.gamma_c + beta * (solution.gamma_c - anchor.gamma_c);
    if (anchor.t_p.n_elem > 0)
    {
        p.t_p = anchor.t_p + beta * (solution.t_p - anchor.t_p);
        p.d_p = anchor.d_p + beta * (solution.d_p - anchor.d_p);
    }
    if (anchor.t_c.n_elem > 0)
    {
        p.t_c = anchor.t_c + beta * (solution.t_c - anchor.t_c);
        p.d_c = anchor.d_c + beta * (solution.d_c - anchor.d_c);
    }
    return p;
}

double anchor_wsr(const SurrogatePoint &anchor, const arma::vec &weights,
                  const NetworkConfig &config)
{
    double wsr = 0.0;
    for (arma::uword k = 0; k < anchor.gamma_p.n_elem; ++k)
    {
        wsr += weights(k) * std::log2(1.0 + anchor.gamma_p(k));
        if (anchor.gamma_c.n_elem > 0)
            wsr += weights(k) * std::log2(1.0 + anchor.gamma_c(k));
    }
    return wsr * config.bandwidth_hz;
}

} // namespace rscran
