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

#pragma once

#include <map>
#include <vector>

#include <armadillo>

#include "rscran/net_model.hpp"

namespace rscran
{

/// Aggregate beamformers, one column per user. Block n of a column (rows
/// n*L .. n*L+L-1) is the beamformer applied at BS n, matching the
/// ChannelState stacking.
struct BeamformerSet
{
    arma::cx_mat wp; ///< (N*L) x K, private
    arma::cx_mat wc; ///< (N*L) x K, common (all-zero under TIN)

    static BeamformerSet zeros(arma::uword rows, arma::uword num_users);
};

/// Common-message structure. phi[k] is the ordered list of common messages
/// user k decodes (first decoded first, own message always present);
/// m[j] is the derived set of users that decode j's common message.
struct CmdSets
{
    std::vector<std::vector<int>> phi;
    std::vector<std::vector<int>> m;

    static CmdSets tin(int num_users);
    void rebuild_m(int num_users);
    bool in_phi(int k, int j) const;
    /// Position of j in phi[k], or -1
    int phi_position(int k, int j) const;
};

struct RateReport
{
    arma::vec gamma_p;                          ///< K private SINRs
    std::vector<std::map<int, double>> gamma_c; ///< [decoder k] -> owner i -> SINR
    arma::vec rate_private;                     ///< bits/s
    arma::vec rate_common;                      ///< bits/s
    double weighted_sum = 0.0;                  ///< bits/s
};

/// Per-BS serving sets (sorted user lists)
struct ClusterAssignment
{
    std::vector<std::vector<int>> kp;
    std::vector<std::vector<int>> kc;

    static ClusterAssignment all(int num_bs, int num_users);
    static ClusterAssignment empty(int num_bs);
    bool serves_p(int n, int k) const;
    bool serves_c(int n, int k) const;
    /// BS indices serving user k's private / common stream
    std::vector<int> private_cluster_of(int k) const;
    std::vector<int> common_cluster_of(int k) const;
};

struct FeasibilityVerdict
{
    std::vector<int> power_violations;
    std::vector<int> backhaul_violations;
    bool feasible() const
    {
        return power_violations.empty() && backhaul_violations.empty();
    }
};

/// SINR of user k decoding its own private message (decoded last; common
/// messages in phi[k] are already cancelled).
double sinr_private(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd, int k,
                    double sigma2_w);

/// SINR at decoder k for the common message of owner i; i must be in phi[k].
/// Residual interference comes from all private streams, common streams not
/// decoded at k, and common streams decoded after i.
double sinr_common(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd,
                   int k_decoder, int i_owner, double sigma2_w);

/// Achievable rates at the given operating point. The common rate of user k
/// is limited by the weakest decoder in m[k].
RateReport rates(const ChannelState &h, const BeamformerSet &w, const CmdSets &cmd,
                 const arma::vec &weights, const NetworkConfig &config);

/// Transmit power spent by BS n across all private and common streams
double bs_power(const BeamformerSet &w, int n, int antennas_per_bs);

/// Exact l0-weighted backhaul load of BS n: rates of streams whose per-BS
/// beamformer power reaches the epsilon threshold.
double backhaul_exact(const BeamformerSet &w, const RateReport &report, int n,
                      int antennas_per_bs, double eps1_w, double eps2_w);

/// Checks per-BS power and cluster-based backhaul limits at relative
/// tolerance tol; empty verdict lists mean feasible.
FeasibilityVerdict check_feasible(const BeamformerSet &w, const RateReport &report,
                                  const NetworkConfig &config, const ClusterAssignment &clusters,
                                  double tol = 1e-6);

} // namespace rscran
