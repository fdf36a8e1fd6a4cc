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

#include "rscran/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rscran
{

std::string to_string(Scheme scheme)
{
    switch (scheme)
    {
    case Scheme::DynamicRSCMD:
        return "dynamic-rscmd";
    case Scheme::StaticRSCMD:
        return "static-rscmd";
    case Scheme::DynamicTIN:
        return "dynamic-tin";
    case Scheme::StaticTIN:
        return "static-tin";
    }
    return "unknown";
}

Scheme scheme_from_string(const std::string &name)
{
    if (name == "dynamic-rscmd")
        return Scheme::DynamicRSCMD;
    if (name == "static-rscmd")
        return Scheme::StaticRSCMD;
    if (name == "dynamic-tin")
        return Scheme::DynamicTIN;
    if (name == "static-tin")
        return Scheme::StaticTIN;
    throw std::invalid_argument("unknown scheme: " + name);
}

bool scheme_is_rs(Scheme scheme)
{
    return scheme == Scheme::DynamicRSCMD || scheme == Scheme::StaticRSCMD;
}

bool scheme_is_dynamic(Scheme scheme)
{
    return scheme == Scheme::DynamicRSCMD || scheme == Scheme::DynamicTIN;
}

namespace
{

double block_power(const arma::cx_mat &w, int n, int antennas, int k)
{
    const arma::uword lo = static_cast<arma::uword>(n) * antennas;
    return std::pow(arma::norm(w.col(k).subvec(lo, lo + antennas - 1)), 2);
}

// gamma anchors from the exact SINR expressions at the current beamformers
void refresh_gamma(SurrogatePoint &pt, const ChannelState &h, const CmdSets &cmd,
                   const NetworkConfig &config, bool include_common)
{
    const int num_users = config.num_users;
    const double sigma2 = config.noise_power_w();
    pt.gamma_p.set_size(num_users);
    for (int k = 0; k < num_users; ++k)
        pt.gamma_p(k) = sinr_private(h, pt.w, cmd, k, sigma2);
    if (include_common)
    {
        pt.gamma_c.set_size(num_users);
        for (int k = 0; k < num_users; ++k)
        {
            double worst = std::numeric_limits<double>::infinity();
            for (int dec : cmd.m[k])
                worst = std::min(worst, sinr_common(h, pt.w, cmd, dec, k, sigma2));
            pt.gamma_c(k) = std::isfinite(worst) ? worst : 0.0;
        }
    }
    else
        pt.gamma_c.reset();
}

void refresh_td(SurrogatePoint &pt, const NetworkConfig &config, double theta,
                bool include_common)
{
    const int num_bs = config.num_bs;
    const int num_users = config.num_users;
    pt.t_p.set_size(num_bs, num_users);
    pt.d_p.set_size(num_users);
    for (int k = 0; k < num_users; ++k)
    {
        pt.d_p(k) = std::log2(1.0 + pt.gamma_p(k));
        for (int n = 0; n < num_bs; ++n)
            pt.t_p(n, k) = f_theta(block_power(pt.w.wp, n, config.antennas_per_bs, k), theta);
    }
    if (include_common)
    {
        pt.t_c.set_size(num_bs, num_users);
        pt.d_c.set_size(num_users);
        for (int k = 0; k < num_users; ++k)
        {
            pt.d_c(k) = std::log2(1.0 + pt.gamma_c(k));
            for (int n = 0; n < num_bs; ++n)
                pt.t_c(n, k) =
                    f_theta(block_power(pt.w.wc, n, config.antennas_per_bs, k), theta);
        }
    }
    else
    {
        pt.t_c.reset();
        pt.d_c.reset();
    }
}

double bilinear_load(const SurrogatePoint &pt, int n, bool include_common)
{
    double load = 0.0;
    for (arma::uword k = 0; k < pt.d_p.n_elem; ++k)
    {
        load += pt.t_p(n, k) * pt.d_p(k);
        if (include_common)
            load += pt.t_c(n, k) * pt.d_c(k);
    }
    return load;
}

// Scale the rate anchors down until every BS meets its bilinear budget. The
// load is linear in d for fixed t, so one exact scaling suffices; lowering d
// (and the matching gamma) keeps every other constraint feasible.
void shrink_rate_anchors_bilinear(SurrogatePoint &pt, const NetworkConfig &config,
                                  bool include_common)
{
    const double budget = config.backhaul_bps() / config.bandwidth_hz;
    for (int guard = 0; guard < 60; ++guard)
    {
        double worst = 0.0;
        for (int n = 0; n < config.num_bs; ++n)
            worst = std::max(worst, bilinear_load(pt, n, include_common));
        if (worst <= budget)
            return;
        const double nu = (budget / worst) * (1.0 - 1e-12);
        pt.d_p *= nu;
        if (include_common)
            pt.d_c *= nu;
        for (arma::uword k = 0; k < pt.d_p.n_elem; ++k)
        {
            pt.gamma_p(k) = std::exp2(pt.d_p(k)) - 1.0;
            if (include_common)
                pt.gamma_c(k) = std::exp2(pt.d_c(k)) - 1.0;
        }
    }
    throw std::runtime_error("could not restore bilinear backhaul feasibility at the anchor");
}

} // namespace

SurrogatePoint make_alg2_anchor(const ChannelState &h, const CmdSets &cmd,
                                const NetworkConfig &config, bool include_common, double theta,
                                const IcaParams &params)
{
    SurrogatePoint pt;
    pt.w = mrc_beamformers(h, config, include_common);
    pt.w.wp *= (1.0 - 1e-9);
    pt.w.wc *= (1.0 - 1e-9);

    const double budget = 0.999 * config.backhaul_bps() / config.bandwidth_hz;
    for (int guard = 0; guard < 300; ++guard)
    {
        refresh_gamma(pt, h, cmd, config, include_common);
        refresh_td(pt, config, theta, include_common);
        double worst = 0.0;
        for (int n = 0; n < config.num_bs; ++n)
            worst = std::max(worst, bilinear_load(pt, n, include_common));
        if (worst <= budget)
            return pt;
        pt.w.wp *= 0.7;
        pt.w.wc *= 0.7;
    }
    throw std::runtime_error("MRC shrink failed to reach a backhaul-feasible anchor");
}

namespace
{

double group_rel_diff(const arma::mat &a, const arma::mat &b)
{
    if (a.n_elem == 0)
        return 0.0;
    const double scale = std::max(1.0, arma::abs(b).max());
    return arma::abs(a - b).max() / scale;
}

double group_rel_diff(const arma::cx_mat &a, const arma::cx_mat &b)
{
    if (a.n_elem == 0)
        return 0.0;
    const double scale = std::max(1.0, arma::abs(b).max());
    return arma::abs(a - b).max() / scale;
}

double stationarity_gap(const SurrogatePoint &sol, const SurrogatePoint &anchor)
{
    double gap = group_rel_diff(sol.w.wp, anchor.w.wp);
    gap = std::max(gap, group_rel_diff(sol.w.wc, anchor.w.wc));
    gap = std::max(gap, group_rel_diff(sol.gamma_p, anchor.gamma_p));
    if (anchor.gamma_c.n_elem > 0 && sol.gamma_c.n_elem > 0)
        gap = std::max(gap, group_rel_diff(sol.gamma_c, anchor.gamma_c));
    if (anchor.t_p.n_elem > 0 && sol.t_p.n_elem > 0)
    {
        gap = std::max(gap, group_rel_diff(sol.t_p, anchor.t_p));
        gap = std::max(gap, group_rel_diff(sol.d_p, anchor.d_p));
    }
    if (anchor.t_c.n_elem > 0 && sol.t_c.n_elem > 0)
    {
        gap = std::max(gap, group_rel_diff(sol.t_c, anchor.t_c));
        gap = std::max(gap, group_rel_diff(sol.d_c, anchor.d_c));
    }
    return gap;
}

// The ICA layer tolerates inner solves that stall slightly short of the
// requested tolerance: the anchor averaging absorbs the slack and the final
// operating point is rechecked exactly. Anything worse than 100x the target
// fails the run.
PrimalSolution solve_with_retry(const SubproblemSpec &spec, double tol, std::string &error)
{
    PrimalSolution sol = solve(spec, tol);
    if (sol.status != SolveStatus::Optimal && sol.kkt_residual <= 100.0 * tol)
        sol.status = SolveStatus::Optimal;
    if (sol.status != SolveStatus::Optimal)
    {
        std::ostringstream os;
        os << "subproblem solve failed (status "
           << (sol.status == SolveStatus::Infeasible ? "infeasible" : "numerical trouble")
           << ", kkt " << sol.kkt_residual << ")";
        error = os.str();
    }
    return sol;
}

} // namespace

Alg2Result run_alg2(const ChannelState &h, const CmdSets &cmd, const IcaParams &params,
                    const NetworkConfig &config, bool include_common, const arma::vec &weights)
{
    params.validate();
    Alg2Result res;
    double theta = params.initial_theta(config);

    SurrogatePoint anchor;
    try
    {
        anchor = make_alg2_anchor(h, cmd, config, include_common, theta, params);
    }
    catch (const std::exception &e)
    {
        res.error = e.what();
        return res;
    }
    res.wsr_trace.push_back(anchor_wsr(anchor, weights, config));

    for (int v = 0; v < params.max_iterations; ++v)
    {
        res.theta_trace.push_back(theta);
        SubproblemSpec spec;
        try
        {
            spec = assemble_opt6(h, cmd, anchor, params, config, theta, include_common, weights);
        }
        catch (const std::exception &e)
        {
            res.error = e.what();
            return res;
        }
        const PrimalSolution sol = solve_with_retry(spec, params.solver_tol, res.error);
        if (std::getenv("RSCRAN_ICA_TRACE"))
            std::fprintf(stderr, "alg2 v=%3d theta=%.3e solver(st=%d it=%d kkt=%.2e) wsr=%.4f\n",
                         v, theta, static_cast<int>(sol.status), sol.iterations,
                         sol.kkt_residual, res.wsr_trace.back() / 1e6);
        if (sol.status != SolveStatus::Optimal)
            return res;

        const SurrogatePoint zhat = unpack_solution(spec, sol.values, params);
        const double gap = stationarity_gap(zhat, anchor);
        anchor = step_update(anchor, zhat, beta_step(params, v));
        res.iterations = v + 1;

        const bool annealing_done = theta < params.xi;
        if (!annealing_done)
        {
            theta *= params.delta;
            // theta changed: refresh the t anchors against the sharper f_theta
            // and restore the bilinear budget if that pushed a BS over.
            for (int k = 0; k < config.num_users; ++k)
                for (int n = 0; n < config.num_bs; ++n)
                {
                    anchor.t_p(n, k) =
                        f_theta(block_power(anchor.w.wp, n, config.antennas_per_bs, k), theta);
                    if (include_common)
                        anchor.t_c(n, k) = f_theta(
                            block_power(anchor.w.wc, n, config.antennas_per_bs, k), theta);
                }
            shrink_rate_anchors_bilinear(anchor, config, include_common);
        }
        res.wsr_trace.push_back(anchor_wsr(anchor, weights, config));

        if (annealing_done && gap <= params.stationarity_tol)
            break;
    }
    res.anchor = std::move(anchor);
    res.ok = true;
    return res;
}

ClusterAssignment extract_clusters(const SurrogatePoint &anchor, double eps1_dbm_hz,
                                   double eps2_dbm_hz, const NetworkConfig &config)
{
    const double eps1_w =
        std::pow(10.0, (eps1_dbm_hz + 10.0 * std::log10(config.bandwidth_hz) - 30.0) / 10.0);
    const double eps2_w =
        std::pow(10.0, (eps2_dbm_hz + 10.0 * std::log10(config.bandwidth_hz) - 30.0) / 10.0);

    ClusterAssignment clusters = ClusterAssignment::empty(config.num_bs);
    for (int n = 0; n < config.num_bs; ++n)
    {
        for (int k = 0; k < config.num_users; ++k)
        {
            if (block_power(anchor.w.wp, n, config.antennas_per_bs, k) >= eps1_w)
                clusters.kp[n].push_back(k);
            if (anchor.w.wc.n_elem > 0 &&
                block_power(anchor.w.wc, n, config.antennas_per_bs, k) >= eps2_w)
                clusters.kc[n].push_back(k);
        }
    }
    return clusters;
}

namespace
{

void mask_to_clusters(BeamformerSet &w, const ClusterAssignment &clusters,
                      const NetworkConfig &config, bool include_common)
{
    const int l = config.antennas_per_bs;
    for (int n = 0; n < config.num_bs; ++n)
    {
        const arma::uword lo = static_cast<arma::uword>(n) * l;
        for (int k = 0; k < config.num_users; ++k)
        {
            if (!clusters.serves_p(n, k))
                w.wp.col(k).subvec(lo, lo + l - 1).zeros();
            if (!include_common || !clusters.serves_c(n, k))
                w.wc.col(k).subvec(lo, lo + l - 1).zeros();
        }
    }
}

BeamformerSet masked_mrc(const ChannelState &h, const ClusterAssignment &clusters,
                         const NetworkConfig &config, bool include_common)
{
    const int l = config.antennas_per_bs;
    BeamformerSet w = BeamformerSet::zeros(h.h.n_rows, h.h.n_cols);
    for (int k = 0; k < config.num_users; ++k)
        for (int n = 0; n < config.num_bs; ++n)
        {
            const arma::uword lo = static_cast<arma::uword>(n) * l;
            if (clusters.serves_p(n, k))
                w.wp.col(k).subvec(lo, lo + l - 1) = h.h.col(k).subvec(lo, lo + l - 1);
            if (include_common && clusters.serves_c(n, k))
                w.wc.col(k).subvec(lo, lo + l - 1) = h.h.col(k).subvec(lo, lo + l - 1);
        }
    double worst = 0.0;
    for (int n = 0; n < config.num_bs; ++n)
        worst = std::max(worst, bs_power(w, n, l));
    const double scale = worst > 0.0 ? std::sqrt(config.p_max_w() / worst) * (1.0 - 1e-9) : 0.0;
    w.wp *= scale;
    w.wc *= scale;
    return w;
}

// The g10 load is linear in d = log2(1+gamma) over the alive members, so one
// exact scaling of the alive rate anchors restores the budget.
void shrink_rate_anchors_g10(SurrogatePoint &pt, const ClusterAssignment &clusters,
                             const NetworkConfig &config, bool include_common,
                             const IcaParams &params)
{
    const double budget = config.backhaul_bps() / config.bandwidth_hz;
    for (int guard = 0; guard < 60; ++guard)
    {
        double nu = 1.0;
        for (int n = 0; n < config.num_bs; ++n)
        {
            double alive = 0.0, dead = 0.0;
            auto tally = [&](double gamma) {
                if (gamma >= params.gamma_anchor_floor)
                    alive += std::log2(1.0 + gamma);
                else
                    dead += std::log2(1.0 + params.gamma_floor);
            };
            for (int k : clusters.kp[n])
                tally(pt.gamma_p(k));
            if (include_common)
                for (int k : clusters.kc[n])
                    tally(pt.gamma_c(k));
            if (alive + dead > budget)
            {
                if (!(alive > 0.0) || budget <= dead)
                    throw std::runtime_error(
                        "could not restore cluster backhaul feasibility at the anchor");
                nu = std::min(nu, (budget - dead) / alive * (1.0 - 1e-12));
            }
        }
        if (nu >= 1.0)
            return;
        auto scale_gamma = [nu](double gamma) {
            return std::exp2(nu * std::log2(1.0 + gamma)) - 1.0;
        };
        for (arma::uword k = 0; k < pt.gamma_p.n_elem; ++k)
        {
            if (pt.gamma_p(k) >= params.gamma_anchor_floor)
                pt.gamma_p(k) = scale_gamma(pt.gamma_p(k));
            if (include_common && pt.gamma_c(k) >= params.gamma_anchor_floor)
                pt.gamma_c(k) = scale_gamma(pt.gamma_c(k));
        }
    }
    throw std::runtime_error("could not restore cluster backhaul feasibility at the anchor");
}

} // namespace

RunResult run_alg3(const ChannelState &h, const CmdSets &cmd, const ClusterAssignment &clusters,
                   const IcaParams &params, const NetworkConfig &config, bool include_common,
                   const SurrogatePoint *warm, const arma::vec &weights)
{
    params.validate();
    RunResult res;
    res.clusters = clusters;

    SurrogatePoint anchor;
    if (warm)
    {
        anchor.w = warm->w;
        mask_to_clusters(anchor.w, clusters, config, include_common);
    }
    else
        anchor.w = masked_mrc(h, clusters, config, include_common);
    refresh_gamma(anchor, h, cmd, config, include_common);
    try
    {
        shrink_rate_anchors_g10(anchor, clusters, config, include_common, params);
    }
    catch (const std::exception &e)
    {
        res.error = e.what();
        return res;
    }

    std::vector<int> unserved;
    for (int v = 0; v < params.max_iterations; ++v)
    {
        SubproblemSpec spec;
        try
        {
            std::vector<int> unserved_now;
            spec = assemble_opt7(h, cmd, clusters, anchor, params, config, include_common,
                                 weights, &unserved_now);
            if (v == 0)
                unserved = std::move(unserved_now);
        }
        catch (const std::exception &e)
        {
            res.error = e.what();
            return res;
        }
        const PrimalSolution sol = solve_with_retry(spec, params.solver_tol, res.error);
        if (std::getenv("RSCRAN_ICA_TRACE"))
            std::fprintf(stderr, "alg3 v=%3d solver(st=%d it=%d kkt=%.2e) wsr=%.4f\n", v,
                         static_cast<int>(sol.status), sol.iterations, sol.kkt_residual,
                         anchor_wsr(anchor, weights, config) / 1e6);
        if (sol.status != SolveStatus::Optimal)
            return res;

        const SurrogatePoint yhat = unpack_solution(spec, sol.values, params);
        const double gap = stationarity_gap(yhat, anchor);
        anchor = step_update(anchor, yhat, beta_step(params, v));
        res.iterations_alg3 = v + 1;
        res.objective_trace.push_back(anchor_wsr(anchor, weights, config));
        if (gap <= params.stationarity_tol)
            break;
    }

    // Final operating point: the CP assigns the anchored SINR targets as
    // message rates; structurally unserved streams carry nothing.
    const int num_users = config.num_users;
    const double b = config.bandwidth_hz;
    res.beams = anchor.w;
    res.report.gamma_p.zeros(num_users);
    res.report.gamma_c.assign(num_users, {});
    res.report.rate_private.zeros(num_users);
    res.report.rate_common.zeros(num_users);

    const double sigma2 = config.noise_power_w();
    bool decodable = true;
    for (int k = 0; k < num_users; ++k)
    {
        if (!clusters.private_cluster_of(k).empty())
        {
            res.report.gamma_p(k) = anchor.gamma_p(k);
            res.report.rate_private(k) = b * std::log2(1.0 + anchor.gamma_p(k));
            const double actual = sinr_private(h, res.beams, cmd, k, sigma2);
            if (actual < anchor.gamma_p(k) * (1.0 - 1e-6) - 1e-12)
                decodable = false;
        }
        if (include_common && !clusters.common_cluster_of(k).empty())
        {
            const double assigned = anchor.gamma_c(k);
            res.report.rate_common(k) = b * std::log2(1.0 + assigned);
            for (int dec : cmd.m[k])
            {
                res.report.gamma_c[dec][k] = assigned;
                const double actual = sinr_common(h, res.beams, cmd, dec, k, sigma2);
                if (actual < assigned * (1.0 - 1e-6) - 1e-12)
                    decodable = false;
            }
        }
    }
    res.report.weighted_sum =
        arma::dot(weights, res.report.rate_private + res.report.rate_common);

    res.verdict = check_feasible(res.beams, res.report, config, clusters, 1e-6);
    res.feasible = res.verdict.feasible() && decodable;
    if (!decodable)
        res.error = "assigned rates not decodable at the final beamformers";
    if (!unserved.empty())
    {
        std::ostringstream os;
        os << "unserved users:";
        for (int k : unserved)
            os << ' ' << k;
        res.error = res.error.empty() ? os.str() : res.error + "; " + os.str();
    }
    return res;
}

ClusterAssignment static_clusters(const ChannelState &h, const NetworkConfig &config,
                                  int cluster_size, const CmdSets &cmd)
{
    if (cluster_size < 1 || cluster_size > config.num_bs)
        throw std::invalid_argument("static_clusters: cluster_size must be in [1, N]");
    const int num_users = config.num_users;
    const int num_bs = config.num_bs;

    std::vector<std::vector<int>> private_bs(num_users);
    for (int k = 0; k < num_users; ++k)
    {
        std::vector<int> order(num_bs);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int bq) {
            if (h.large_scale_gain_db(a, k) != h.large_scale_gain_db(bq, k))
                return h.large_scale_gain_db(a, k) > h.large_scale_gain_db(bq, k);
            return a < bq;
        });
        private_bs[k].assign(order.begin(), order.begin() + cluster_size);
    }

    ClusterAssignment clusters = ClusterAssignment::empty(num_bs);
    for (int k = 0; k < num_users; ++k)
        for (int n : private_bs[k])
            clusters.kp[n].push_back(k);

    // Common cluster: union over the private clusters of k's decoders
    for (int k = 0; k < num_users; ++k)
    {
        std::vector<bool> in(num_bs, false);
        for (int dec : cmd.m[k])
            for (int n : private_bs[dec])
                in[n] = true;
        for (int n = 0; n < num_bs; ++n)
            if (in[n])
                clusters.kc[n].push_back(k);
    }
    for (auto &v : clusters.kp)
        std::sort(v.begin(), v.end());
    for (auto &v : clusters.kc)
        std::sort(v.begin(), v.end());
    return clusters;
}

RunResult run_scheme(Scheme scheme, const ChannelState &h, const NetworkConfig &config,
                     const SchemeParams &params)
try
{
    const arma::vec weights = params.weights.n_elem > 0
                                  ? params.weights
                                  : arma::vec(config.num_users, arma::fill::ones);
    const bool rs = scheme_is_rs(scheme);

    CmdSets cmd =
        rs ? build_cmd_sets(h, config, params.cmd) : CmdSets::tin(config.num_users);

    RunResult res;
    if (scheme_is_dynamic(scheme))
    {
        const Alg2Result a2 = run_alg2(h, cmd, params.ica, config, rs, weights);
        if (!a2.ok)
        {
            res.scheme = scheme;
            res.mu = rs ? params.cmd.mu : 0.0;
            res.error = a2.error;
            return res;
        }
        const ClusterAssignment clusters =
            extract_clusters(a2.anchor, params.eps1_dbm_hz, params.eps2_dbm_hz, config);
        res = run_alg3(h, cmd, clusters, params.ica, config, rs, &a2.anchor, weights);
        res.iterations_alg2 = a2.iterations;
        res.objective_trace.insert(res.objective_trace.begin(), a2.wsr_trace.begin(),
                                   a2.wsr_trace.end());
    }
    else
    {
        const ClusterAssignment clusters =
            static_clusters(h, config, params.static_cluster_size, cmd);
        res = run_alg3(h, cmd, clusters, params.ica, config, rs, nullptr, weights);
    }
    res.scheme = scheme;
    res.mu = rs ? params.cmd.mu : 0.0;
    return res;
}
catch (const std::exception &e)
{
    RunResult res;
    res.scheme = scheme;
    res.mu = scheme_is_rs(scheme) ? params.cmd.mu : 0.0;
    res.error = e.what();
    return res;
}

} // namespace rscran
