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

#include <set>

#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rscran/cmd_select.hpp"

using namespace rscran;

TEST_CASE("mrc_beamformers: directions and exact power scaling", "[cmd-select]")
{
    Rng rng(21);
    NetworkConfig cfg = oracle::desk_config(2, 1, 2);
    const ChannelState h = oracle::random_channels(2, 1, 2, rng, 1e-4);

    for (bool include_common : {true, false})
    {
        const BeamformerSet w = mrc_beamformers(h, cfg, include_common);
        // column aligned with the channel
        const std::complex<double> z = arma::cdot(h.h.col(0), w.wp.col(0));
        CHECK(std::abs(z) == Catch::Approx(arma::norm(h.h.col(0)) *
                                           arma::norm(w.wp.col(0))).epsilon(1e-12));
        double pmax = 0.0;
        for (int n = 0; n < cfg.num_bs; ++n)
        {
            REQUIRE(bs_power(w, n, cfg.antennas_per_bs) <= cfg.p_max_w() * (1.0 + 1e-12));
            pmax = std::max(pmax, bs_power(w, n, cfg.antennas_per_bs));
        }
        CHECK(pmax == Catch::Approx(cfg.p_max_w()).epsilon(1e-12));
        if (!include_common)
            CHECK(arma::norm(w.wc, "fro") == 0.0);
    }
}

TEST_CASE("mrc_beamformers preserve orthogonality", "[cmd-select]")
{
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    ChannelState h;
    h.h.zeros(2, 2);
    h.h(0, 0) = {2.0, 1.0};
    h.h(1, 1) = {0.0, 3.0};
    h.large_scale_gain_db.zeros(1, 2);
    h.user_positions.zeros(2, 2);
    const BeamformerSet w = mrc_beamformers(h, cfg, true);
    CHECK(std::abs(arma::cdot(w.wp.col(0), w.wp.col(1))) < 1e-15);
}

TEST_CASE("interference_powers: zero diagonal-coupling cases and oracle", "[cmd-select]")
{
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    ChannelState h;
    h.h.zeros(2, 2);
    h.h(0, 0) = 1.0;
    h.h(1, 1) = 1.0;
    h.large_scale_gain_db.zeros(1, 2);
    h.user_positions.zeros(2, 2);
    const BeamformerSet w = mrc_beamformers(h, cfg, false);
    const arma::mat inter = interference_powers(h, w);
    CHECK(inter(0, 1) == 0.0);
    CHECK(inter(1, 0) == 0.0);

    Rng rng(22);
    const ChannelState hr = oracle::random_channels(1, 3, 2, rng);
    const BeamformerSet wr = mrc_beamformers(hr, oracle::desk_config(1, 3, 2), false);
    const arma::mat ir = interference_powers(hr, wr);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
        {
            if (i == k)
                CHECK(ir(k, i) == 0.0);
            else
                CHECK(ir(k, i) ==
                      Catch::Approx(oracle::rx_power(hr.h, wr.wp, k, i)).epsilon(1e-12));
        }

    // symmetric two-user instance: MRC interference matrix is symmetric
    const ChannelState h2 = oracle::random_channels(1, 2, 2, rng);
    const BeamformerSet w2 = mrc_beamformers(h2, oracle::desk_config(1, 2, 2), false);
    const arma::mat i2 = interference_powers(h2, w2);
    CHECK(i2(0, 1) == Catch::Approx(i2(1, 0)).epsilon(1e-12));
}

TEST_CASE("build_cmd_sets: degenerate percentiles", "[cmd-select]")
{
    Rng rng(23);
    NetworkConfig cfg = oracle::desk_config(2, 4, 2);
    const ChannelState h = oracle::random_channels(2, 4, 2, rng, 1e-4);

    CmdSelectParams p0;
    p0.mu = 0.0;
    const CmdSets none = build_cmd_sets(h, cfg, p0);
    for (int k = 0; k < 4; ++k)
        CHECK(none.phi[k] == std::vector<int>{k});

    NetworkConfig cfg1 = oracle::desk_config(1, 1, 2);
    const ChannelState h1 = oracle::random_channels(1, 1, 2, rng, 1e-4);
    const CmdSets single = build_cmd_sets(h1, cfg1, CmdSelectParams{});
    CHECK(single.phi[0] == std::vector<int>{0});
    CHECK(single.m[0] == std::vector<int>{0});
}

TEST_CASE("build_cmd_sets: hand-executed 2-user strong-interference case", "[cmd-select]")
{
    // symmetric cross-gains, both users weak at mu = 100, D = 1
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    ChannelState h;
    h.h.set_size(2, 2);
    h.h(0, 0) = {1.0, 0.0};
    h.h(1, 0) = {0.8, 0.1};
    h.h(0, 1) = {0.79, 0.12};
    h.h(1, 1) = {0.99, 0.02};
    h.h *= 1e-4;
    h.large_scale_gain_db.zeros(1, 2);
    h.user_positions.zeros(2, 2);

    CmdSelectParams params;
    params.mu = 100.0;
    params.d_layers = 1;
    const CmdSets cmd = build_cmd_sets(h, cfg, params);

    const double n0 = arma::norm(h.h.col(0));
    const double n1 = arma::norm(h.h.col(1));
    const std::vector<int> expected = n0 >= n1 ? std::vector<int>{0, 1}
                                               : std::vector<int>{1, 0};
    CHECK(cmd.phi[0] == expected);
    CHECK(cmd.phi[1] == expected);
    CHECK(cmd.m[0] == std::vector<int>{0, 1});
    CHECK(cmd.m[1] == std::vector<int>{0, 1});
}

TEST_CASE("decode_order: sorting, idempotence, tie break", "[cmd-select]")
{
    Rng rng(24);
    ChannelState h = oracle::random_channels(1, 3, 2, rng);
    h.h.col(2) = h.h.col(1); // tie between users 1 and 2

    CmdSets cmd;
    cmd.phi = {{2, 0, 1}, {1}, {2}};
    cmd.rebuild_m(3);
    const CmdSets sorted = decode_order(cmd, h);

    arma::vec norms(3);
    for (int j = 0; j < 3; ++j)
        norms(j) = arma::norm(h.h.col(j));
    for (size_t pos = 1; pos < sorted.phi[0].size(); ++pos)
        REQUIRE(norms(sorted.phi[0][pos - 1]) >= norms(sorted.phi[0][pos]));

    // ties by ascending user index: 1 before 2
    const int pos1 = sorted.phi_position(0, 1);
    const int pos2 = sorted.phi_position(0, 2);
    CHECK(pos1 < pos2);

    const CmdSets twice = decode_order(sorted, h);
    CHECK(twice.phi == sorted.phi);
}

TEST_CASE("property: phi/m duality, caps, determinism", "[cmd-select]")
{
    Rng rng(25);
    NetworkConfig cfg = oracle::desk_config(3, 6, 2);
    const ChannelState h = oracle::random_channels(3, 6, 2, rng, 1e-4);
    CmdSelectParams params;
    params.mu = 50.0;
    params.d_layers = 2;

    const CmdSets a = build_cmd_sets(h, cfg, params);
    const CmdSets b = build_cmd_sets(h, cfg, params);
    CHECK(a.phi == b.phi);

    for (int k = 0; k < 6; ++k)
    {
        REQUIRE(static_cast<int>(a.phi[k].size()) <=
                std::min(params.d_layers + 1, cfg.antennas_per_bs));
        CHECK(a.phi_position(k, k) >= 0);
        for (int j : a.phi[k])
            CHECK(std::find(a.m[j].begin(), a.m[j].end(), k) != a.m[j].end());
    }
    for (int j = 0; j < 6; ++j)
        for (int k : a.m[j])
            CHECK(a.in_phi(k, j));
}

TEST_CASE("property: memberships grow with mu", "[cmd-select]")
{
    Rng rng(26);
    NetworkConfig cfg = oracle::desk_config(3, 6, 4);
    const ChannelState h = oracle::random_channels(3, 6, 4, rng, 1e-4);

    auto memberships = [&](double mu) {
        CmdSelectParams p;
        p.mu = mu;
        p.d_layers = 1;
        const CmdSets cmd = build_cmd_sets(h, cfg, p);
        std::set<std::pair<int, int>> pairs;
        for (int k = 0; k < 6; ++k)
            for (int j : cmd.phi[k])
                pairs.insert({k, j});
        return pairs;
    };

    const auto base = memberships(0.0);
    auto prev = base;
    for (double mu : {20.0, 40.0, 60.0, 80.0, 100.0})
    {
        const auto cur = memberships(mu);
        for (const auto &pr : prev)
            REQUIRE(cur.count(pr) == 1);
        prev = cur;
    }
}
