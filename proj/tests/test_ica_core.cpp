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
#include "rscran/algorithms.hpp"
#include "rscran/cmd_select.hpp"
#include "rscran/ica_core.hpp"

using namespace rscran;

namespace
{

// Anchor with exact-SINR gammas and equality t/d, as Algorithm 2 initializes
SurrogatePoint exact_anchor(const ChannelState &h, const CmdSets &cmd,
                            const NetworkConfig &cfg, bool include_common, double theta,
                            double power_scale = 1.0)
{
    SurrogatePoint pt;
    pt.w = mrc_beamformers(h, cfg, include_common);
    pt.w.wp *= power_scale;
    pt.w.wc *= power_scale;
    const double sigma2 = cfg.noise_power_w();
    const int k_users = cfg.num_users;
    pt.gamma_p.set_size(k_users);
    for (int k = 0; k < k_users; ++k)
        pt.gamma_p(k) = sinr_private(h, pt.w, cmd, k, sigma2);
    if (include_common)
    {
        pt.gamma_c.set_size(k_users);
        for (int k = 0; k < k_users; ++k)
        {
            double worst = std::numeric_limits<double>::infinity();
            for (int dec : cmd.m[k])
                worst = std::min(worst, sinr_common(h, pt.w, cmd, dec, k, sigma2));
            pt.gamma_c(k) = worst;
        }
    }
    pt.t_p.set_size(cfg.num_bs, k_users);
    pt.d_p.set_size(k_users);
    if (include_common)
    {
        pt.t_c.set_size(cfg.num_bs, k_users);
        pt.d_c.set_size(k_users);
    }
    for (int k = 0; k < k_users; ++k)
    {
        pt.d_p(k) = std::log2(1.0 + pt.gamma_p(k));
        if (include_common)
            pt.d_c(k) = std::log2(1.0 + pt.gamma_c(k));
        for (int n = 0; n < cfg.num_bs; ++n)
        {
            const arma::uword lo = static_cast<arma::uword>(n) * cfg.antennas_per_bs;
            const arma::uword hi = lo + cfg.antennas_per_bs - 1;
            pt.t_p(n, k) = f_theta(std::pow(arma::norm(pt.w.wp.col(k).subvec(lo, hi)), 2), theta);
            if (include_common)
                pt.t_c(n, k) =
                    f_theta(std::pow(arma::norm(pt.w.wc.col(k).subvec(lo, hi)), 2), theta);
        }
    }
    return pt;
}

} // namespace

TEST_CASE("f_theta: values, bounds, gradient", "[ica-core]")
{
    CHECK(f_theta(0.0, 0.3) == 0.0);
    CHECK(f_theta(0.3, 0.3) == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(f_theta(1e9, 1e-3) < 1.0);
    CHECK_THROWS_AS(f_theta(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(f_theta(-1.0, 0.5), std::domain_error);

    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial)
    {
        const double theta = 0.01 + rng.uniform();
        const double x = rng.uniform() * 5.0;
        const double fd = oracle::fd_grad([theta](double v) { return f_theta(v, theta); }, x);
        REQUIRE(f_theta_grad(x, theta) == Catch::Approx(fd).epsilon(1e-6));
        REQUIRE(f_theta_grad(x, theta) > 0.0);
    }
}

TEST_CASE("bilinear_split equals the product", "[ica-core]")
{
    CHECK(bilinear_split(0.0, 3.7) == 0.0);
    CHECK(bilinear_split(1.0, 1.0) == Catch::Approx(1.0).epsilon(1e-15));
    Rng rng(32);
    for (int trial = 0; trial < 100000; ++trial)
    {
        const double t = rng.uniform(-10.0, 10.0);
        const double d = rng.uniform(-10.0, 10.0);
        REQUIRE(bilinear_split(t, d) == Catch::Approx(t * d).margin(1e-12));
    }
}

TEST_CASE("g2_tilde: tightness, dominance, anchor gradient", "[ica-core]")
{
    Rng rng(33);
    NetworkConfig cfg = oracle::desk_config(2, 3, 2);
    const double cn = cfg.backhaul_bps();
    const double b = cfg.bandwidth_hz;

    for (int trial = 0; trial < 25; ++trial)
    {
        SurrogatePoint anchor;
        anchor.t_p.set_size(2, 3);
        anchor.t_c.set_size(2, 3);
        anchor.d_p.set_size(3);
        anchor.d_c.set_size(3);
        for (int k = 0; k < 3; ++k)
        {
            anchor.d_p(k) = rng.uniform() * 4.0;
            anchor.d_c(k) = rng.uniform() * 4.0;
            for (int n = 0; n < 2; ++n)
            {
                anchor.t_p(n, k) = rng.uniform();
                anchor.t_c(n, k) = rng.uniform();
            }
        }

        // C1 tightness: value at the anchor equals the exact bilinear load
        for (int n = 0; n < 2; ++n)
        {
            double exact = -cn / b;
            for (int k = 0; k < 3; ++k)
                exact += anchor.t_p(n, k) * anchor.d_p(k) + anchor.t_c(n, k) * anchor.d_c(k);
            REQUIRE(g2_tilde(anchor.t_p, anchor.t_c, anchor.d_p, anchor.d_c, anchor, n, cn, b) ==
                    Catch::Approx(exact).margin(1e-10));
        }

        // C2 dominance on random evaluation points
        for (int sample = 0; sample < 40; ++sample)
        {
            arma::mat t_p(2, 3), t_c(2, 3);
            arma::vec d_p(3), d_c(3);
            for (int k = 0; k < 3; ++k)
            {
                d_p(k) = rng.uniform() * 4.0;
                d_c(k) = rng.uniform() * 4.0;
                for (int n = 0; n < 2; ++n)
                {
                    t_p(n, k) = rng.uniform();
                    t_c(n, k) = rng.uniform();
                }
            }
            for (int n = 0; n < 2; ++n)
            {
                double exact = -cn / b;
                for (int k = 0; k < 3; ++k)
                    exact += t_p(n, k) * d_p(k) + t_c(n, k) * d_c(k);
                REQUIRE(g2_tilde(t_p, t_c, d_p, d_c, anchor, n, cn, b) >= exact - 1e-10);
            }
        }

        // C5 gradient agreement at the anchor, by central differences
        const int n = 0, k = 1;
        auto eval_t = [&](double v) {
            arma::mat t_p = anchor.t_p;
            t_p(n, k) = v;
            return g2_tilde(t_p, anchor.t_c, anchor.d_p, anchor.d_c, anchor, n, cn, b);
        };
        auto eval_d = [&](double v) {
            arma::vec d_p = anchor.d_p;
            d_p(k) = v;
            return g2_tilde(anchor.t_p, anchor.t_c, d_p, anchor.d_c, anchor, n, cn, b);
        };
        REQUIRE(oracle::fd_grad(eval_t, anchor.t_p(n, k)) ==
                Catch::Approx(anchor.d_p(k)).epsilon(1e-6).margin(1e-8));
        REQUIRE(oracle::fd_grad(eval_d, anchor.d_p(k)) ==
                Catch::Approx(anchor.t_p(n, k)).epsilon(1e-6).margin(1e-8));
    }
}

TEST_CASE("linearize_ftheta: tightness, dominance, zero anchor", "[ica-core]")
{
    Rng rng(34);
    const double theta = 0.05;
    for (int trial = 0; trial < 200; ++trial)
    {
        arma::cx_vec w(3), wt(3);
        for (int i = 0; i < 3; ++i)
        {
            w(i) = rng.normal_complex();
            wt(i) = rng.normal_complex();
        }
        const double at_anchor = linearize_ftheta(wt, wt, theta);
        REQUIRE(at_anchor ==
                Catch::Approx(f_theta(std::pow(arma::norm(wt), 2), theta)).margin(1e-10));
        REQUIRE(linearize_ftheta(w, wt, theta) >=
                f_theta(std::pow(arma::norm(w), 2), theta) - 1e-10);
    }
    // zero anchor: f(0) + 2/(pi theta) |w|^2
    arma::cx_vec w{{1.0, -2.0}, {0.5, 0.0}};
    arma::cx_vec zero(2, arma::fill::zeros);
    const double expected = 2.0 / (M_PI * theta) * std::pow(arma::norm(w), 2);
    CHECK(linearize_ftheta(w, zero, theta) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("linearize_log: tightness, dominance, exact slope", "[ica-core]")
{
    CHECK(linearize_log(1.0, 1.0) == Catch::Approx(1.0).margin(1e-14));
    const double at3 = linearize_log(3.0, 1.0);
    CHECK(at3 == Catch::Approx(1.0 + 1.0 / M_LN2).epsilon(1e-12));
    CHECK(at3 > std::log2(4.0));
    CHECK_THROWS_AS(linearize_log(1.0, 0.0), std::domain_error);

    Rng rng(35);
    for (int trial = 0; trial < 500; ++trial)
    {
        const double gt = 0.01 + 10.0 * rng.uniform();
        const double g = 0.01 + 20.0 * rng.uniform();
        REQUIRE(linearize_log(g, gt) >= std::log2(1.0 + g) - 1e-12);
        const AffineExpr e = linearize_log_expr(gt);
        REQUIRE(e.slope == Catch::Approx(1.0 / ((1.0 + gt) * M_LN2)).epsilon(1e-15));
    }
}

TEST_CASE("qol_lower_bound: tightness, dominance, orthogonal anchor", "[ica-core]")
{
    Rng rng(36);
    for (int trial = 0; trial < 1000; ++trial)
    {
        arma::cx_vec h(3), w(3), wt(3);
        for (int i = 0; i < 3; ++i)
        {
            h(i) = rng.normal_complex();
            w(i) = rng.normal_complex();
            wt(i) = rng.normal_complex();
        }
        const double gamma = 0.05 + 5.0 * rng.uniform();
        const double gamma_t = 0.05 + 5.0 * rng.uniform();
        const double bound = qol_lower_bound(h, w, gamma, wt, gamma_t);
        const double exact = std::norm(arma::cdot(h, w)) / gamma;
        REQUIRE(bound <= exact + 1e-10);
        const double tight = qol_lower_bound(h, wt, gamma_t, wt, gamma_t);
        REQUIRE(tight == Catch::Approx(std::norm(arma::cdot(h, wt)) / gamma_t).epsilon(1e-12));
    }
    // anchor orthogonal to the channel: bound collapses to zero
    arma::cx_vec h{{1.0, 0.0}, {0.0, 0.0}};
    arma::cx_vec wt{{0.0, 0.0}, {1.0, 0.0}};
    arma::cx_vec w{{0.7, -0.3}, {0.2, 0.1}};
    CHECK(qol_lower_bound(h, w, 2.0, wt, 1.0) == 0.0);
}

TEST_CASE("g7/g8: tightness at an exact anchor and contract violation", "[ica-core]")
{
    Rng rng(37);
    NetworkConfig cfg = oracle::desk_config(2, 3, 2);
    const ChannelState h = oracle::random_channels(2, 3, 2, rng, 1e-4);
    CmdSelectParams params;
    params.mu = 100.0;
    const CmdSets cmd = build_cmd_sets(h, cfg, params);
    const double sigma2 = cfg.noise_power_w();
    const SurrogatePoint anchor = exact_anchor(h, cmd, cfg, true, 1e-2);

    // gamma anchored at the exact SINR makes g7 vanish at the anchor; the
    // cancellation scale is the denominator value signal/gamma
    for (int k = 0; k < 3; ++k)
    {
        const double v = g7_tilde(h, cmd, anchor.w, anchor.gamma_p(k), anchor, k, sigma2);
        const double scale =
            oracle::rx_power(h.h, anchor.w.wp, k, k) / anchor.gamma_p(k);
        REQUIRE(std::abs(v) <= 1e-10 * scale);
    }
    for (int k = 0; k < 3; ++k)
        for (int dec : cmd.m[k])
        {
            // the shared gamma_c is the min over decoders, so every instance
            // is feasible and the weakest one is tight
            const double v =
                g8_tilde(h, cmd, anchor.w, anchor.gamma_c(k), anchor, k, dec, sigma2);
            const double scale =
                oracle::rx_power(h.h, anchor.w.wc, dec, k) / anchor.gamma_c(k);
            REQUIRE(v <= 1e-10 * scale);
        }

    CHECK_THROWS_AS(g8_tilde(h, CmdSets::tin(3), anchor.w, 1.0, anchor, 0, 1, sigma2),
                    std::invalid_argument);
}

TEST_CASE("g7/g8: surrogate feasibility implies the exact constraints", "[ica-core]")
{
    Rng rng(38);
    NetworkConfig cfg = oracle::desk_config(2, 3, 2);
    const ChannelState h = oracle::random_channels(2, 3, 2, rng, 1e-4);
    CmdSelectParams params;
    params.mu = 100.0;
    const CmdSets cmd = build_cmd_sets(h, cfg, params);
    const double sigma2 = cfg.noise_power_w();
    const SurrogatePoint anchor = exact_anchor(h, cmd, cfg, true, 1e-2);

    int checked = 0;
    for (int trial = 0; trial < 400; ++trial)
    {
        // random perturbation around the anchor
        BeamformerSet w = anchor.w;
        for (arma::uword c = 0; c < w.wp.n_cols; ++c)
            for (arma::uword r = 0; r < w.wp.n_rows; ++r)
            {
                w.wp(r, c) += 0.3 * arma::norm(anchor.w.wp.col(c)) * rng.normal_complex() /
                              std::sqrt(4.0);
                w.wc(r, c) += 0.3 * arma::norm(anchor.w.wc.col(c)) * rng.normal_complex() /
                              std::sqrt(4.0);
            }
        for (int k = 0; k < 3; ++k)
        {
            const double gamma = anchor.gamma_p(k) * (0.5 + rng.uniform());
            if (g7_tilde(h, cmd, w, gamma, anchor, k, sigma2) <= 0.0)
            {
                REQUIRE(oracle::sinr_private(h, w, cmd, k, sigma2) >= gamma * (1.0 - 1e-9));
                ++checked;
            }
            const double gamma_c = anchor.gamma_c(k) * (0.5 + rng.uniform());
            bool all_ok = true;
            for (int dec : cmd.m[k])
                all_ok = all_ok &&
                         g8_tilde(h, cmd, w, gamma_c, anchor, k, dec, sigma2) <= 0.0;
            if (all_ok)
            {
                for (int dec : cmd.m[k])
                    REQUIRE(oracle::sinr_common(h, w, cmd, dec, k, sigma2) >=
                            gamma_c * (1.0 - 1e-9));
                ++checked;
            }
        }
    }
    // the sampler must actually exercise the implication
    REQUIRE(checked > 100);
}

TEST_CASE("g9_prox: zero at anchor, sign symmetry, elementwise oracle", "[ica-core]")
{
    Rng rng(39);
    NetworkConfig cfg = oracle::desk_config(1, 2, 2);
    const ChannelState h = oracle::random_channels(1, 2, 2, rng);
    const CmdSets cmd = CmdSets::tin(2);
    SurrogatePoint anchor = exact_anchor(h, cmd, cfg, true, 1e-2);

    CHECK(g9_prox(anchor.w, anchor.gamma_p, anchor.gamma_c, anchor, 0.1, 0.2) == 0.0);

    BeamformerSet plus = anchor.w, minus = anchor.w;
    arma::vec gplus = anchor.gamma_p, gminus = anchor.gamma_p;
    const arma::cx_double dw{0.3, -0.2};
    plus.wp(1, 0) += dw;
    minus.wp(1, 0) -= dw;
    gplus(1) += 0.7;
    gminus(1) -= 0.7;
    CHECK(g9_prox(plus, gplus, anchor.gamma_c, anchor, 0.1, 0.2) ==
          Catch::Approx(g9_prox(minus, gminus, anchor.gamma_c, anchor, 0.1, 0.2))
              .epsilon(1e-12));

    // elementwise recomputation
    const double rho1 = 0.03, rho2 = 0.4;
    double expected = 0.0;
    for (arma::uword i = 0; i < plus.wp.n_elem; ++i)
        expected += rho1 * std::norm(plus.wp(i) - anchor.w.wp(i)) +
                    rho1 * std::norm(plus.wc(i) - anchor.w.wc(i));
    for (arma::uword i = 0; i < gplus.n_elem; ++i)
        expected += rho2 * std::pow(gplus(i) - anchor.gamma_p(i), 2);
    CHECK(g9_prox(plus, gplus, anchor.gamma_c, anchor, rho1, rho2) ==
          Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("assemble_opt6: constraint census on the smallest instance", "[ica-core]")
{
    Rng rng(40);
    NetworkConfig cfg = oracle::desk_config(1, 1, 2);
    cfg.backhaul_capacity_mbps = 1000.0;
    const ChannelState h = oracle::random_channels(1, 1, 2, rng, 1e-4);
    const CmdSets cmd = CmdSets::tin(1);
    IcaParams params;
    const double theta = params.initial_theta(cfg);
    SurrogatePoint anchor = make_alg2_anchor(h, cmd, cfg, true, theta, params);
    const arma::vec w1{1.0};

    const SubproblemSpec spec = assemble_opt6(h, cmd, anchor, params, cfg, theta, true, w1);
    int power = 0, backhaul = 0, ftheta = 0, loglin = 0, g7 = 0, g8 = 0;
    for (const auto &c : spec.constraints)
        switch (c.family)
        {
        case ConstraintFamily::Power:
            ++power;
            break;
        case ConstraintFamily::BackhaulBilinear:
            ++backhaul;
            break;
        case ConstraintFamily::FthetaPrivate:
        case ConstraintFamily::FthetaCommon:
            ++ftheta;
            break;
        case ConstraintFamily::LogPrivate:
        case ConstraintFamily::LogCommon:
            ++loglin;
            break;
        case ConstraintFamily::SinrPrivate:
            ++g7;
            break;
        case ConstraintFamily::SinrCommon:
            ++g8;
            break;
        default:
            break;
        }
    CHECK(power == 1);
    CHECK(backhaul == 1);
    CHECK(ftheta == 2);
    CHECK(loglin == 2);
    CHECK(g7 == 1);
    CHECK(g8 == 1);

    // the anchor itself satisfies every assembled constraint
    for (const auto &c : spec.constraints)
        REQUIRE(spec.eval_constraint(c, spec.x0) <= 1e-8 * std::max(1.0, std::abs(c.constant)));
}

TEST_CASE("step_update: endpoint and limit behavior", "[ica-core]")
{
    Rng rng(41);
    NetworkConfig cfg = oracle::desk_config(2, 2, 2);
    const ChannelState h = oracle::random_channels(2, 2, 2, rng, 1e-4);
    const CmdSets cmd = CmdSets::tin(2);
    IcaParams params;
    const double theta = params.initial_theta(cfg);
    const SurrogatePoint a = make_alg2_anchor(h, cmd, cfg, true, theta, params);
    SurrogatePoint b = a;
    b.w.wp *= 0.5;
    b.gamma_p *= 0.25;
    b.d_p *= 0.5;

    const SurrogatePoint replaced = step_update(a, b, 1.0);
    CHECK(arma::norm(replaced.w.wp - b.w.wp, "fro") == 0.0);
    CHECK(arma::norm(replaced.gamma_p - b.gamma_p) == 0.0);

    const SurrogatePoint nearly = step_update(a, b, 1e-12);
    CHECK(arma::abs(nearly.gamma_p - a.gamma_p).max() <= 1e-10 * arma::abs(a.gamma_p).max());

    CHECK_THROWS_AS(step_update(a, b, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(step_update(a, b, 1.5), std::invalid_argument);
}
