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

#include "rscran/rs_model.hpp"

namespace rscran
{

struct CmdSelectParams
{
    double mu = 25.0;  ///< weak-user percentile, 0..100
    int d_layers = 1;  ///< extra common messages a weak user decodes
    int max_phi = 0;   ///< cap on |phi_k|; 0 means use the antenna count L

    void validate() const;
};

/// Channel-matched beamformers scaled by a single global factor so the most
/// loaded BS transmits at exactly p_max. With include_common the common
/// columns reuse the private directions and both copies count toward the
/// power budget.
BeamformerSet mrc_beamformers(const ChannelState &h, const NetworkConfig &config,
                              bool include_common = true);

/// I(k,i) = |h_k^H wp_i|^2 for i != k; diagonal left at zero
arma::mat interference_powers(const ChannelState &h, const BeamformerSet &w);

/// Weak users (TIN rate within the mu-th percentile under MRC) get their
/// d_layers strongest interferers added to phi; each phi is then put in
/// decoding order.
CmdSets build_cmd_sets(const ChannelState &h, const NetworkConfig &config,
                       const CmdSelectParams &params);

/// Sorts each phi_k by aggregate channel norm descending (ties by user
/// index); idempotent.
CmdSets decode_order(CmdSets cmd, const ChannelState &h);

} // namespace rscran
