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

#include "rscran/rs_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace rscran
{

BeamformerSet BeamformerSet::zeros(arma::uword rows, arma::uword num_users)
{
    BeamformerSet w;
    w.wp.zeros(rows, num_users);
    w.wc.zeros(rows, num_users);
    return w;
}

CmdSets CmdSets::tin(int num_users)
{
    CmdSets cmd;
    cmd.phi.resize(num_users);
    for (int k = 0; k < num_users; ++k)
        cmd.phi[k] = {k};
    cmd.rebuild_m(num_users);
    return cmd;
}

void CmdSets::rebuild_m(int num_users)
{
    m.assign(num_users, {});
    for (int k = 0; k < static_cast<int>(phi.size()); ++k)
        for (int j : phi[k])
            m[j].push_back(k);
    for (auto &set : m)
        std::sort(set.begin(), set.end());
}

bool CmdSets::in_phi(int k, int j) const
{
    return phi_position(k, j) >= 0;
}

int CmdSets::phi_position(int k, int j) const
{
    const auto &p = phi[k];
    for (int pos = 0; pos < static_cast<int>(p.size()); ++pos)
        if (p[pos] == j)
            return pos;
    return -1;
}

ClusterAssignment ClusterAssignment::all(int num_bs, int num_users)
{
    ClusterAssignment c;
    std::vector<int> everyone(num_users);
    for (int k = 0; k < num_users; ++k)
        everyone[k] = k;
    c.kp.assign(num_bs, everyone);
    c.kc.assign(num_bs, everyone);
    return c;
}

ClusterAssignment ClusterAssignment::empty(int num_bs)
{
    ClusterAssignment c;
    c.kp.assign(num_bs, {});
    c.kc.assign(num_bs, {});
    return c;
}

bool ClusterAssignment::serves_p(int n, int k) const
{
    return std::binary_search(kp[n].begin(), kp[n].end(), k);
}

bool ClusterAssignment::serves_c(int n, int k) const
{
    return std::binary_search(kc[n].begin(), kc[n].end(), k);
}

std::vector<int> ClusterAssignment::private_cluster_of(int k) const
{
    std::vector<int> out;
    for (int n = 0; n < static_cast<int>(kp.size()); ++n)
        if (serves_p(n, k))
            out.push_back(n);
    return out;
}

std::vector<int> ClusterAssignment::common_cluster_of(int k) const
{
    std::vector<int> out;
    for (int n = 0; n < static_cast<int>(kc.size()); ++n)
        if (serves_c(n, k))
            out.push_back(n);
    return out;
}

namespace
{
inline double rx_power(const arma::cx_mat &h, const arma::cx_mat &w, int rx_user, int tx_col)
{
    const std::complex<double> z = arma::cdot(h.col(rx_user), w.col(tx_col));
    return std::norm(z);
}
} // namespace

double sinr_private(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd, int k,
                    double sigma2_w)
{
    const int num_users = static_cast<int>(h.h.n_cols);
    double denom = sigma2_w;
    for (int j = 0; j < num_users; ++j)
        if (j != k)
            denom += rx_power(h.h, w.wp, k, j);
    for (int l = 0; l < num_users; ++l)
        if (!cmd.in_phi(k, l))
            denom += rx_power(h.h, w.wc, k, l);
    return rx_power(h.h, w.wp, k, k) / denom;
}

double sinr_common(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd,
                   int k_decoder, int i_owner, double sigma2_w)
{
    const int pos_i = cmd.phi_position(k_decoder, i_owner);
    if (pos_i < 0)
        throw std::invalid_argument("sinr_common: owner not in decoder's phi set");

    const int num_users = static_cast<int>(h.h.n_cols);
    double denom = sigma2_w;
    for (int j = 0; j < num_users; ++j)
        denom += rx_power(h.h, w.wp, k_decoder, j); // T_k: every private stream interferes
    for (int l = 0; l < num_users; ++l)
        if (!cmd.in_phi(k_decoder, l))
            denom += rx_power(h.h, w.wc, k_decoder, l);
    const auto &order = cmd.phi[k_decoder];
    for (int pos = pos_i + 1; pos < static_cast<int>(order.size()); ++pos)
        denom += rx_power(h.h, w.wc, k_decoder, order[pos]);
    return rx_power(h.h, w.wc, k_decoder, i_owner) / denom;
}

RateReport rates(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd,
                 const arma::vec &weights, const NetworkConfig &config)
{
    const int num_users = static_cast<int>(h.h.n_cols);
    const double sigma2 = config.noise_power_w();
    const double b = config.bandwidth_hz;

    RateReport r;
    r.gamma_p.zeros(num_users);
    r.gamma_c.resize(num_users);
    r.rate_private.zeros(num_users);
    r.rate_common.zeros(num_users);

    for (int k = 0; k < num_users; ++k)
    {
        r.gamma_p(k) = sinr_private(h, w, cmd, k, sigma2);
        r.rate_private(k) = b * std::log2(1.0 + r.gamma_p(k));
        for (int i : cmd.phi[k])
            r.gamma_c[k][i] = sinr_common(h, w, cmd, k, i, sigma2);
    }
    for (int k = 0; k < num_users; ++k)
    {
        // Common rate of k is achievable at every decoder in m[k]
        double worst = std::numeric_limits<double>::infinity();
        for (int i : cmd.m[k])
            worst = std::min(worst, r.gamma_c[i].at(k));
        if (!std::isfinite(worst))
            worst = 0.0;
        r.rate_common(k) = b * std::log2(1.0 + worst);
    }
    r.weighted_sum = arma::dot(weights, r.rate_private + r.rate_common);
    return r;
}

double bs_power(const BeamformerSet &w, int n, int antennas_per_bs)
{
    const arma::uword lo = static_cast<arma::uword>(n) * antennas_per_bs;
    const arma::uword hi = lo + antennas_per_bs - 1;
    double p = 0.0;
    for (arma::uword k = 0; k < w.wp.n_cols; ++k)
        p += std::pow(arma::norm(w.wp.col(k).subvec(lo, hi)), 2) +
             std::pow(arma::norm(w.wc.col(k).subvec(lo, hi)), 2);
    return p;
}

double backhaul_exact(const BeamformerSet &w, const RateReport &report, int n,
                      int antennas_per_bs, double eps1_w, double eps2_w)
{
    const arma::uword lo = static_cast<arma::uword>(n) * antennas_per_bs;
    const arma::uword hi = lo + antennas_per_bs - 1;
    double load = 0.0;
    for (arma::uword k = 0; k < w.wp.n_cols; ++k)
    {
        if (std::pow(arma::norm(w.wp.col(k).subvec(lo, hi)), 2) >= eps1_w)
            load += report.rate_private(k);
        if (std::pow(arma::norm(w.wc.col(k).subvec(lo, hi)), 2) >= eps2_w)
            load += report.rate_common(k);
    }
    return load;
}

FeasibilityVerdict check_feasible(const BeamformerSet &w, const RateReport &report,
                                  const NetworkConfig &config, const ClusterAssignment &clusters,
                                  double tol)
{
    FeasibilityVerdict v;
    const double p_max = config.p_max_w();
    const double c_n = config.backhaul_bps();
    for (int n = 0; n < config.num_bs; ++n)
    {
        if (bs_power(w, n, config.antennas_per_bs) > p_max * (1.0 + tol))
            v.power_violations.push_back(n);
        double load = 0.0;
        for (int k : clusters.kp[n])
            load += report.rate_private(k);
        for (int k : clusters.kc[n])
            load += report.rate_common(k);
        if (load > c_n * (1.0 + tol))
            v.backhaul_violations.push_back(n);
    }
    return v;
}

} // namespace rscran
