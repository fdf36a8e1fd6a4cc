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

#include <armadillo>
#include <cstdint>
#include <string>

#include "rscran/rng.hpp"

namespace rscran
{

/// Network-level parameters. dB/dBm quantities live at this boundary only;
/// everything downstream works in linear units.
struct NetworkConfig
{
    int num_bs = 7;                        ///< N
    int num_users = 28;                    ///< K
    int antennas_per_bs = 8;               ///< L
    double inter_site_distance_m = 200.0;
    double bandwidth_hz = 10e6;
    double noise_psd_dbm_hz = -169.0;
    double pathloss_a_db = 140.7;
    double pathloss_b_db_per_decade = 36.7;
    double shadow_sigma_db = 8.0;
    double antenna_gain_dbi = 15.0;
    double p_max_dbm = 30.0;
    double backhaul_capacity_mbps = 100.0; ///< per BS, identical across BSs
    std::uint64_t rng_seed = 1;

    double p_max_w() const;
    double noise_power_w() const; ///< sigma^2 over the full band, watts
    double backhaul_bps() const;

    /// Throws std::invalid_argument when invariants are violated
    void validate() const;

    /// Load from a JSON config file section (keys match the field names,
    /// with dB/dBm units spelled out in the key suffix).
    static NetworkConfig from_json_file(const std::string &path);
    static NetworkConfig from_json_text(const std::string &text);
    std::string to_json_text() const;
};

struct Topology
{
    arma::mat bs_positions;  ///< 2 x N, meters
    arma::mat wrap_offsets;  ///< 2 x M translation vectors (zero offset included)
};

struct ChannelState
{
    arma::cx_mat h;                ///< (N*L) x K; column k stacks h_{1,k},...,h_{N,k}
    arma::mat large_scale_gain_db; ///< N x K, realized path gain + shadowing + antenna gain
    arma::mat user_positions;      ///< 2 x K, meters
};

/// Hexagonal 7-cell layout with wraparound; linear layout for other N.
Topology build_topology(const NetworkConfig &config);

/// Torus distance: min over wraparound images of p2
double wrap_distance(const arma::vec2 &p1, const arma::vec2 &p2, const Topology &topo);

/// Large-scale gain in dB (negative), antenna gain included once per link.
/// Distances below 10 m are clamped before the formula; d <= 0 throws.
double path_gain_db(double distance_m, const NetworkConfig &config);

/// sigma^2 in dBm over the full band
double noise_power_dbm(const NetworkConfig &config);

/// Drops users and draws one block-fading realization. Deterministic in rng.
ChannelState generate_channels(const NetworkConfig &config, const Topology &topo, Rng &rng);

inline double db_to_linear(double db)
{
    return std::pow(10.0, db / 10.0);
}
inline double dbm_to_watts(double dbm)
{
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

} // namespace rscran
