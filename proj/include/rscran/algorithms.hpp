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

#include <optional>
#include <string>

#include "rscran/cmd_select.hpp"
#include "rscran/ica_core.hpp"
#include "rscran/solver.hpp"

namespace rscran
{

enum class Scheme
{
    DynamicRSCMD,
    StaticRSCMD,
    DynamicTIN,
    StaticTIN,
};

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string &name);
bool scheme_is_rs(Scheme scheme);
bool scheme_is_dynamic(Scheme scheme);

struct SchemeParams
{
    CmdSelectParams cmd;
    IcaParams ica;
    double eps1_dbm_hz = -80.0;
    double eps2_dbm_hz = -80.0;
    int static_cluster_size = 3;
    arma::vec weights; ///< empty selects all-ones
};

struct Alg2Result
{
    SurrogatePoint anchor;
    std::vector<double> wsr_trace;   ///< exact WSR at each anchor, bits/s
    std::vector<double> theta_trace; ///< smoothing value per iteration
    int iterations = 0;
    bool ok = false;
    std::string error;
};

struct RunResult
{
    BeamformerSet beams;
    ClusterAssignment clusters;
    RateReport report;
    std::vector<double> objective_trace; ///< exact WSR per iteration, bits/s
    int iterations_alg2 = 0;
    int iterations_alg3 = 0;
    FeasibilityVerdict verdict;
    bool feasible = false;
    Scheme scheme = Scheme::DynamicTIN;
    double mu = 0.0;
    std::string error;
};

/// Feasible starting anchor for the clustering problem: MRC beamformers
/// shrunk until the bilinear backhaul budget holds, with gamma/t/d derived
/// from the exact expressions.
SurrogatePoint make_alg2_anchor(const ChannelState &h, const CmdSets &cmd,
                                const NetworkConfig &config, bool include_common, double theta,
                                const IcaParams &params);

/// Clustering ICA (successive convexification of the relaxed problem with
/// theta annealing).
Alg2Result run_alg2(const ChannelState &h, const CmdSets &cmd, const IcaParams &params,
                    const NetworkConfig &config, bool include_common, const arma::vec &weights);

/// PSD thresholds (dBm/Hz) integrated over the bandwidth select block powers
/// into per-BS serving sets.
ClusterAssignment extract_clusters(const SurrogatePoint &anchor, double eps1_dbm_hz,
                                   double eps2_dbm_hz, const NetworkConfig &config);

/// Fixed-cluster beamforming ICA; warm may carry the Algorithm 2 anchor.
RunResult run_alg3(const ChannelState &h, const CmdSets &cmd, const ClusterAssignment &clusters,
                   const IcaParams &params, const NetworkConfig &config, bool include_common,
                   const SurrogatePoint *warm, const arma::vec &weights);

/// Path-loss clusters: each user's strongest cluster_size BSs serve its
/// private stream; the common cluster is the union over its decoders'
/// private clusters.
ClusterAssignment static_clusters(const ChannelState &h, const NetworkConfig &config,
                                  int cluster_size, const CmdSets &cmd);

/// Full pipeline for one channel realization
RunResult run_scheme(Scheme scheme, const ChannelState &h, const NetworkConfig &config,
                     const SchemeParams &params);

} // namespace rscran
