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

#include "rscran/net_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rscran
{

double NetworkConfig::p_max_w() const
{
    return dbm_to_watts(p_max_dbm);
}

double NetworkConfig::noise_power_w() const
{
    return dbm_to_watts(noise_power_dbm(*this));
}

double NetworkConfig::backhaul_bps() const
{
    return backhaul_capacity_mbps * 1e6;
}

void NetworkConfig::validate() const
{
    if (num_bs < 1)
        throw std::invalid_argument("numBs must be >= 1");
    if (num_users < 1)
        throw std::invalid_argument("numUsers must be >= 1");
    if (antennas_per_bs < 1)
        throw std::invalid_argument("antennasPerBs must be >= 1");
    if (!(bandwidth_hz > 0.0))
        throw std::invalid_argument("bandwidth must be > 0");
    if (!(inter_site_distance_m > 0.0))
        throw std::invalid_argument("interSiteDistance must be > 0");
    if (!(backhaul_capacity_mbps > 0.0))
        throw std::invalid_argument("backhaulCapacityMbps must be > 0");
    if (shadow_sigma_db < 0.0)
        throw std::invalid_argument("shadowSigmaDb must be >= 0");
}

NetworkConfig NetworkConfig::from_json_text(const std::string &text)
{
    const auto j = nlohmann::json::parse(text);
    NetworkConfig c;
    auto get = [&j](const char *key, auto &field) {
        if (j.contains(key))
            field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("numBs", c.num_bs);
    get("numUsers", c.num_users);
    get("antennasPerBs", c.antennas_per_bs);
    get("interSiteDistance", c.inter_site_distance_m);
    get("bandwidth", c.bandwidth_hz);
    get("noisePsdDbmHz", c.noise_psd_dbm_hz);
    get("pathlossADb", c.pathloss_a_db);
    get("pathlossBDbPerDecade", c.pathloss_b_db_per_decade);
    get("shadowSigmaDb", c.shadow_sigma_db);
    get("antennaGainDbi", c.antenna_gain_dbi);
    get("pMaxDbm", c.p_max_dbm);
    get("backhaulCapacityMbps", c.backhaul_capacity_mbps);
    get("rngSeed", c.rng_seed);
    c.validate();
    return c;
}

NetworkConfig NetworkConfig::from_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string NetworkConfig::to_json_text() const
{
    nlohmann::json j;
    j["numBs"] = num_bs;
    j["numUsers"] = num_users;
    j["antennasPerBs"] = antennas_per_bs;
    j["interSiteDistance"] = inter_site_distance_m;
    j["bandwidth"] = bandwidth_hz;
    j["noisePsdDbmHz"] = noise_psd_dbm_hz;
    j["pathlossADb"] = pathloss_a_db;
    j["pathlossBDbPerDecade"] = pathloss_b_db_per_decade;
    j["shadowSigmaDb"] = shadow_sigma_db;
    j["antennaGainDbi"] = antenna_gain_dbi;
    j["pMaxDbm"] = p_max_dbm;
    j["backhaulCapacityMbps"] = backhaul_capacity_mbps;
    j["rngSeed"] = rng_seed;
    return j.dump(2);
}

Topology build_topology(const NetworkConfig &config)
{
    config.validate();
    const int n = config.num_bs;
    const double d = config.inter_site_distance_m;

    Topology topo;
    topo.bs_positions.zeros(2, n);

    if (n == 7)
    {
        // Center cell plus 6 neighbors at 0, 60, ..., 300 degrees
        for (int i = 1; i < 7; ++i)
        {
            const double a = (i - 1) * M_PI / 3.0;
            topo.bs_positions(0, i) = d * std::cos(a);
            topo.bs_positions(1, i) = d * std::sin(a);
        }
        // Cluster repeat translations of the 7-cell group on the triangular
        // lattice: c1 = 2*a1 + a2, and its 60-degree rotations.
        const arma::vec2 c1 = {2.5 * d, std::sqrt(3.0) / 2.0 * d};
        const arma::vec2 c2 = {0.5 * d, 3.0 * std::sqrt(3.0) / 2.0 * d};
        const arma::vec2 c3 = {-2.0 * d, std::sqrt(3.0) * d}; // c2 - c1
        topo.wrap_offsets.zeros(2, 7);
        topo.wrap_offsets.col(1) = c1;
        topo.wrap_offsets.col(2) = -c1;
        topo.wrap_offsets.col(3) = c2;
        topo.wrap_offsets.col(4) = -c2;
        topo.wrap_offsets.col(5) = c3;
        topo.wrap_offsets.col(6) = -c3;
    }
    else
    {
        // Desk-scale fallback: BSs on a line, no wraparound images
        for (int i = 0; i < n; ++i)
            topo.bs_positions(0, i) = i * d;
        topo.wrap_offsets.zeros(2, 1);
    }
    return topo;
}

double wrap_distance(const arma::vec2 &p1, const arma::vec2 &p2, const Topology &topo)
{
    double best = std::numeric_limits<double>::infinity();
    for (arma::uword m = 0; m < topo.wrap_offsets.n_cols; ++m)
    {
        const double dx = p1(0) - (p2(0) + topo.wrap_offsets(0, m));
        const double dy = p1(1) - (p2(1) + topo.wrap_offsets(1, m));
        best = std::min(best, std::hypot(dx, dy));
    }
    return best;
}

double path_gain_db(double distance_m, const NetworkConfig &config)
{
    if (!(distance_m > 0.0))
        throw std::domain_error("path_gain_db: distance must be > 0");
    const double d_km = std::max(distance_m, 10.0) / 1000.0;
    const double loss = config.pathloss_a_db + config.pathloss_b_db_per_decade * std::log10(d_km);
    return -loss + config.antenna_gain_dbi;
}

double noise_power_dbm(const NetworkConfig &config)
{
    return config.noise_psd_dbm_hz + 10.0 * std::log10(config.bandwidth_hz);
}

namespace
{

// Voronoi cell of the triangular lattice: hexagon with flat sides facing the
// neighbor directions, inradius d/2.
bool inside_hexagon(double x, double y, double d)
{
    const double half = d / 2.0;
    for (int i = 0; i < 3; ++i)
    {
        const double a = i * M_PI / 3.0;
        if (std::abs(x * std::cos(a) + y * std::sin(a)) > half)
            return false;
    }
    return true;
}

arma::vec2 drop_in_cell(const arma::vec2 &center, double d, Rng &rng)
{
    const double r = d / std::sqrt(3.0); // circumradius
    for (;;)
    {
        const double x = rng.uniform() * 2.0 * r - r;
        const double y = rng.uniform() * 2.0 * r - r;
        if (inside_hexagon(x, y, d))
            return {center(0) + x, center(1) + y};
    }
}

} // namespace

ChannelState generate_channels(const NetworkConfig &config, const Topology &topo, Rng &rng)
{
    config.validate();
    const int n_bs = config.num_bs;
    const int n_users = config.num_users;
    const int l = config.antennas_per_bs;
    const double d = config.inter_site_distance_m;

    ChannelState cs;
    cs.user_positions.zeros(2, n_users);
    cs.large_scale_gain_db.zeros(n_bs, n_users);
    cs.h.zeros(static_cast<arma::uword>(n_bs) * l, n_users);

    // Balanced round-robin cell assignment when K is a multiple of N,
    // uniform random cell otherwise.
    const bool balanced = (n_users % n_bs == 0);
    for (int k = 0; k < n_users; ++k)
    {
        const int cell = balanced ? (k % n_bs) : static_cast<int>(rng.uniform_int(n_bs));
        cs.user_positions.col(k) = drop_in_cell(topo.bs_positions.col(cell), d, rng);
    }

    for (int k = 0; k < n_users; ++k)
    {
        for (int n = 0; n < n_bs; ++n)
        {
            const double dist =
                wrap_distance(topo.bs_positions.col(n), cs.user_positions.col(k), topo);
            const double shadow = config.shadow_sigma_db * rng.normal();
            const double gain_db = path_gain_db(dist, config) + shadow;
            cs.large_scale_gain_db(n, k) = gain_db;
            const double amp = std::sqrt(db_to_linear(gain_db));
            for (int a = 0; a < l; ++a)
                cs.h(static_cast<arma::uword>(n) * l + a, k) = amp * rng.normal_complex();
        }
    }
    return cs;
}

} // namespace rscran
