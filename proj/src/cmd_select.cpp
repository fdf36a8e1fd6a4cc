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

#include "rscran/cmd_select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rscran
{

void CmdSelectParams::validate() const
{
    if (mu < 0.0 || mu > 100.0)
        throw std::invalid_argument("mu must be in [0, 100]");
    if (d_layers < 0)
        throw std::invalid_argument("dLayers must be >= 0");
}

BeamformerSet mrc_beamformers(const ChannelState &h, const NetworkConfig &config,
                              bool include_common)
{
    const int num_bs = config.num_bs;
    const int l = config.antennas_per_bs;
    const double p_max = config.p_max_w();

    // Per-BS power of unscaled MRC: sum_k ||h_{n,k}||^2 per message copy
    double worst = 0.0;
    for (int n = 0; n < num_bs; ++n)
    {
        const arma::uword lo = static_cast<arma::uword>(n) * l;
        double p = 0.0;
        for (arma::uword k = 0; k < h.h.n_cols; ++k)
            p += std::pow(arma::norm(h.h.col(k).subvec(lo, lo + l - 1)), 2);
        if (include_common)
            p *= 2.0;
        worst = std::max(worst, p);
    }
    const double scale = worst > 0.0 ? std::sqrt(p_max / worst) : 0.0;

    BeamformerSet w;
    w.wp = scale * h.h;
    w.wc = include_common ? w.wp : arma::cx_mat(arma::size(h.h), arma::fill::zeros);
    return w;
}

arma::mat interference_powers(const ChannelState &h, const BeamformerSet &w)
{
    const int num_users = static_cast<int>(h.h.n_cols);
    arma::mat inter(num_users, num_users, arma::fill::zeros);
    for (int k = 0; k < num_users; ++k)
        for (int i = 0; i < num_users; ++i)
            if (i != k)
                inter(k, i) = std::norm(arma::cdot(h.h.col(k), w.wp.col(i)));
    return inter;
}

CmdSets build_cmd_sets(const ChannelState &h, const NetworkConfig &config,
                       const CmdSelectParams &params)
{
    params.validate();
    const int num_users = static_cast<int>(h.h.n_cols);
    const int cap = std::min(params.d_layers + 1,
                             params.max_phi > 0 ? params.max_phi : config.antennas_per_bs);

    CmdSets cmd = CmdSets::tin(num_users);

    if (params.mu > 0.0 && params.d_layers > 0 && num_users > 1)
    {
        const BeamformerSet w = mrc_beamformers(h, config, false);
        const RateReport tin_report =
            rates(h, w, CmdSets::tin(num_users), arma::vec(num_users, arma::fill::ones), config);

        // Nearest-rank percentile of the TIN rate vector; a user is weak when
        // its rate does not exceed that value.
        arma::vec sorted = arma::sort(tin_report.rate_private);
        const int rank = std::max(
            1, static_cast<int>(std::ceil(params.mu / 100.0 * num_users)));
        const double threshold = sorted(std::min(rank, num_users) - 1);

        const arma::mat inter = interference_powers(h, w);

        for (int k = 0; k < num_users; ++k)
        {
            if (tin_report.rate_private(k) > threshold)
                continue;
            std::vector<bool> taken(num_users, false);
            taken[k] = true;
            for (int pick = 0; pick < params.d_layers; ++pick)
            {
                if (static_cast<int>(cmd.phi[k].size()) >= cap)
                    break;
                int best = -1;
                for (int i = 0; i < num_users; ++i)
                    if (!taken[i] && (best < 0 || inter(k, i) > inter(k, best)))
                        best = i;
                if (best < 0 || inter(k, best) <= 0.0)
                    break;
                taken[best] = true;
                cmd.phi[k].push_back(best);
            }
        }
    }

    cmd = decode_order(std::move(cmd), h);
    cmd.rebuild_m(num_users);
    return cmd;
}

CmdSets decode_order(CmdSets cmd, const ChannelState &h)
{
    arma::vec norms(h.h.n_cols);
    for (arma::uword j = 0; j < h.h.n_cols; ++j)
        norms(j) = arma::norm(h.h.col(j));
    for (auto &order : cmd.phi)
    {
        std::sort(order.begin(), order.end(), [&norms](int a, int b) {
            if (norms(a) != norms(b))
                return norms(a) > norms(b);
            return a < b;
        });
    }
    cmd.rebuild_m(static_cast<int>(h.h.n_cols));
    return cmd;
}

} // namespace rscran
