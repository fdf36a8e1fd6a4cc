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

#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rscran/rs_model.hpp"

using namespace rscran;

namespace
{
CmdSets decode_order_norms(CmdSets cmd, const ChannelState &h)
{
    arma::vec norms(h.h.n_cols);
    for (arma::uword j = 0; j < h.h.n_cols; ++j)
        norms(j) = arma::norm(h.h.col(j));
    for (auto &order : cmd.phi)
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (norms(a) != norms(b))
                return norms(a) > norms(b);
            return a < b;
        });
    cmd.rebuild_m(static_cast<int>(h.h.n_cols));
    return cmd;
}

CmdSets full_rs_cmd(const ChannelState &h)
{
    // every user decodes everyone's common message, ordered by channel norm
    const int k_users = static_cast<int>(h.h.n_cols);
    CmdSets cmd;
    cmd.phi.resize(k_users);
    for (int k = 0; k < k_users; ++k)
    {
        cmd.phi[k].resize(k_users);
        for (int j = 0; j < k_users; ++j)
            cmd.phi[k][j] = j;
    }
    cmd.rebuild_m(k_users);
    return decode_order_norms(std::move(cmd), h);
}
} // namespace

TEST_CASE("sinr_private: single user reduces to SNR", "[rs-model]")
{
    Rng rng(3);
    const ChannelState h = oracle::random_channels(1, 1, 2, rng);
    BeamformerSet w = oracle::random_beams(2, 1, rng);
    w.wc.zeros();
    const CmdSets cmd = CmdSets::tin(1);
    const double sigma2 = 0.37;
    const double expected = oracle::rx_power(h.h, w.wp, 0, 0) / sigma2;
    CHECK(sinr_private(h, w, cmd, 0, sigma2) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("sinr_private: zero beamformers give zero", "[rs-model]")
{
    Rng rng(4);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng);
    const BeamformerSet w = BeamformerSet::zeros(2, 2);
    const CmdSets cmd = CmdSets::tin(2);
    CHECK(sinr_private(h, w, cmd, 0, 1e-3) == 0.0);
    CHECK(sinr_private(h, w, cmd, 1, 1e-3) == 0.0);
}

TEST_CASE("sinr_private matches the term-by-term oracle", "[rs-model]")
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial)
    {
        const ChannelState h = oracle::random_channels(1, 2, 2, rng);
        const BeamformerSet w = oracle::random_beams(2, 2, rng);
        const CmdSets cmd = full_rs_cmd(h);
        for (int k = 0; k < 2; ++k)
        {
            const double mine = sinr_private(h, w, cmd, k, 0.01);
            const double ref = oracle::sinr_private(h, w, cmd, k, 0.01);
            REQUIRE(mine == Catch::Approx(ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("sinr_common: last decoded with full phi sees only private interference",
          "[rs-model]")
{
    Rng rng(6);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng);
    const BeamformerSet w = oracle::random_beams(2, 2, rng);
    const CmdSets cmd = full_rs_cmd(h);
    const double sigma2 = 0.05;
    const int k = 0;
    const int last = cmd.phi[k].back();

    double t_k = sigma2;
    for (int j = 0; j < 2; ++j)
        t_k += oracle::rx_power(h.h, w.wp, k, j);
    const double expected = oracle::rx_power(h.h, w.wc, k, last) / t_k;
    CHECK(sinr_common(h, w, cmd, k, last, sigma2) == Catch::Approx(expected).epsilon(1e-13));
}

TEST_CASE("sinr_common: zero common beams give zero; bad owner throws", "[rs-model]")
{
    Rng rng(7);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng);
    BeamformerSet w = oracle::random_beams(2, 2, rng);
    w.wc.zeros();
    const CmdSets cmd = full_rs_cmd(h);
    CHECK(sinr_common(h, w, cmd, 0, cmd.phi[0][0], 0.1) == 0.0);

    const CmdSets tin = CmdSets::tin(2);
    CHECK_THROWS_AS(sinr_common(h, w, tin, 0, 1, 0.1), std::invalid_argument);
}

TEST_CASE("sinr_common on a 3-user instance matches the brute-force oracle", "[rs-model]")
{
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial)
    {
        const ChannelState h = oracle::random_channels(1, 3, 2, rng);
        const BeamformerSet w = oracle::random_beams(2, 3, rng);
        const CmdSets cmd = full_rs_cmd(h);
        for (int k = 0; k < 3; ++k)
            for (int i : cmd.phi[k])
            {
                const double mine = sinr_common(h, w, cmd, k, i, 0.02);
                const double ref = oracle::sinr_common(h, w, cmd, k, i, 0.02);
                REQUIRE(mine == Catch::Approx(ref).epsilon(1e-12));
            }
    }
}

TEST_CASE("rates: TIN degenerate and exact single-user value", "[rs-model]")
{
    // wc = 0 makes the common rates vanish and the sum equals TIN
    Rng rng(9);
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng, 1e-5);
    BeamformerSet w = oracle::random_beams(2, 2, rng, 0.1);
    w.wc.zeros();
    const arma::vec ones2(2, arma::fill::ones);
    const RateReport rep = rates(h, w, CmdSets::tin(2), ones2, cfg);
    CHECK(rep.rate_common(0) == 0.0);
    CHECK(rep.rate_common(1) == 0.0);
    double tin_sum = 0.0;
    for (int k = 0; k < 2; ++k)
        tin_sum += cfg.bandwidth_hz *
                   std::log2(1.0 + oracle::sinr_private(h, w, CmdSets::tin(2), k,
                                                        cfg.noise_power_w()));
    CHECK(rep.weighted_sum == Catch::Approx(tin_sum).epsilon(1e-12));

    // gamma = 1 at 10 MHz gives exactly 10 Mbps
    NetworkConfig cfg1 = oracle::desk_config(1, 1, 1);
    ChannelState h1;
    h1.h.set_size(1, 1);
    h1.h(0, 0) = 1.0;
    h1.large_scale_gain_db.zeros(1, 1);
    h1.user_positions.zeros(2, 1);
    BeamformerSet w1 = BeamformerSet::zeros(1, 1);
    w1.wp(0, 0) = std::sqrt(cfg1.noise_power_w());
    const RateReport rep1 = rates(h1, w1, CmdSets::tin(1), arma::vec{1.0}, cfg1);
    CHECK(rep1.gamma_p(0) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(rep1.weighted_sum == Catch::Approx(10e6).epsilon(1e-12));
}

TEST_CASE("rates: common rate is the worst decoder's", "[rs-model]")
{
    Rng rng(10);
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng, 1e-5);
    const BeamformerSet w = oracle::random_beams(2, 2, rng, 0.1);
    const CmdSets cmd = full_rs_cmd(h);
    const arma::vec ones2(2, arma::fill::ones);
    const RateReport rep = rates(h, w, cmd, ones2, cfg);
    for (int k = 0; k < 2; ++k)
    {
        double worst = std::numeric_limits<double>::infinity();
        for (int dec : cmd.m[k])
            worst = std::min(worst, oracle::sinr_common(h, w, cmd, dec, k,
                                                        cfg.noise_power_w()));
        CHECK(rep.rate_common(k) ==
              Catch::Approx(cfg.bandwidth_hz * std::log2(1.0 + worst)).epsilon(1e-12));
    }
}

TEST_CASE("bs_power cases", "[rs-model]")
{
    CHECK(bs_power(BeamformerSet::zeros(4, 3), 0, 2) == 0.0);
    CHECK(bs_power(BeamformerSet::zeros(4, 3), 1, 2) == 0.0);

    BeamformerSet w = BeamformerSet::zeros(4, 1);
    w.wp(2, 0) = std::sqrt(0.5);
    CHECK(bs_power(w, 1, 2) == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(bs_power(w, 0, 2) == 0.0);

    Rng rng(11);
    const BeamformerSet wr = oracle::random_beams(6, 3, rng);
    for (int n = 0; n < 3; ++n)
    {
        double ref = 0.0;
        for (int k = 0; k < 3; ++k)
            for (int a = 0; a < 2; ++a)
                ref += std::norm(wr.wp(2 * n + a, k)) + std::norm(wr.wc(2 * n + a, k));
        CHECK(bs_power(wr, n, 2) == Catch::Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("backhaul_exact applies the threshold indicators", "[rs-model]")
{
    RateReport rep;
    rep.rate_private = arma::vec{100e6, 5e6};
    rep.rate_common = arma::vec{0.0, 7e6};
    rep.gamma_p = arma::vec{1.0, 1.0};
    rep.gamma_c.resize(2);

    BeamformerSet w = BeamformerSet::zeros(2, 2);
    CHECK(backhaul_exact(w, rep, 0, 2, 1e-4, 1e-4) == 0.0);

    w.wp(0, 0) = 0.1; // |.|^2 = 0.01 above threshold
    CHECK(backhaul_exact(w, rep, 0, 2, 1e-4, 1e-4) == Catch::Approx(100e6));

    Rng rng(12);
    const BeamformerSet wr = oracle::random_beams(4, 2, rng, 0.02);
    for (int n = 0; n < 2; ++n)
        CHECK(backhaul_exact(wr, rep, n, 2, 1e-4, 2e-4) ==
              Catch::Approx(oracle::backhaul_indicator(wr, rep, n, 2, 1e-4, 2e-4)));
}

TEST_CASE("check_feasible flags exactly the offending BS", "[rs-model]")
{
    NetworkConfig cfg = oracle::desk_config(2, 2, 2);
    const ClusterAssignment clusters = ClusterAssignment::all(2, 2);
    RateReport rep;
    rep.rate_private = arma::vec{1e6, 1e6};
    rep.rate_common = arma::vec{0.0, 0.0};
    rep.gamma_p = arma::vec{1.0, 1.0};
    rep.gamma_c.resize(2);

    const BeamformerSet zeros = BeamformerSet::zeros(4, 2);
    CHECK(check_feasible(zeros, rep, cfg, clusters).feasible());

    // exactly at the power budget: feasible at tol 1e-6
    BeamformerSet at_budget = BeamformerSet::zeros(4, 2);
    at_budget.wp(0, 0) = std::sqrt(cfg.p_max_w());
    at_budget.wp(2, 0) = std::sqrt(cfg.p_max_w());
    CHECK(check_feasible(at_budget, rep, cfg, clusters).feasible());

    // doubled power on BS 1 only
    BeamformerSet hot = at_budget;
    hot.wp(2, 0) *= std::sqrt(2.0) + 1e-3;
    const FeasibilityVerdict v = check_feasible(hot, rep, cfg, clusters);
    REQUIRE(v.power_violations == std::vector<int>{1});
    CHECK(v.backhaul_violations.empty());

    // backhaul violation via the cluster loads
    NetworkConfig tiny = cfg;
    tiny.backhaul_capacity_mbps = 1.0;
    const FeasibilityVerdict vb = check_feasible(zeros, rep, tiny, clusters);
    CHECK(vb.backhaul_violations == std::vector<int>{0, 1});
}

TEST_CASE("property: uniform scaling never increases any SINR", "[rs-model]")
{
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial)
    {
        const ChannelState h = oracle::random_channels(1, 3, 2, rng);
        const BeamformerSet w = oracle::random_beams(2, 3, rng);
        const CmdSets cmd = full_rs_cmd(h);
        const double c = 0.05 + 0.95 * rng.uniform();
        BeamformerSet ws = w;
        ws.wp *= c;
        ws.wc *= c;
        for (int k = 0; k < 3; ++k)
        {
            REQUIRE(sinr_private(h, ws, cmd, k, 0.1) <=
                    sinr_private(h, w, cmd, k, 0.1) * (1.0 + 1e-12));
            for (int i : cmd.phi[k])
                REQUIRE(sinr_common(h, ws, cmd, k, i, 0.1) <=
                        sinr_common(h, w, cmd, k, i, 0.1) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("property: a later decoding position never hurts the common SINR", "[rs-model]")
{
    // Fewer residual interferers remain for later positions, so moving a
    // message from first to last can only raise its SINR.
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial)
    {
        const ChannelState h = oracle::random_channels(1, 3, 2, rng);
        const BeamformerSet w = oracle::random_beams(2, 3, rng);
        CmdSets cmd = full_rs_cmd(h);
        const int k = 0;
        const int first = cmd.phi[k].front();
        const double as_first = sinr_common(h, w, cmd, k, first, 0.1);
        CmdSets swapped = cmd;
        swapped.phi[k].erase(swapped.phi[k].begin());
        swapped.phi[k].push_back(first);
        const double as_last = sinr_common(h, w, swapped, k, first, 0.1);
        REQUIRE(as_last >= as_first * (1.0 - 1e-12));
    }
}

TEST_CASE("property: backhaul_exact is monotone in the rates", "[rs-model]")
{
    Rng rng(15);
    const BeamformerSet w = oracle::random_beams(4, 3, rng, 0.05);
    RateReport lo, hi;
    lo.rate_private = arma::vec{1e6, 2e6, 3e6};
    lo.rate_common = arma::vec{1e5, 0.0, 2e5};
    hi.rate_private = lo.rate_private * 1.5;
    hi.rate_common = lo.rate_common + 1e5;
    for (int n = 0; n < 2; ++n)
        CHECK(backhaul_exact(w, lo, n, 2, 1e-4, 1e-4) <=
              backhaul_exact(w, hi, n, 2, 1e-4, 1e-4));
}
