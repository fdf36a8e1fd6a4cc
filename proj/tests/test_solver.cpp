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
#include "reference_solver.hpp"
#include "rscran/algorithms.hpp"
#include "rscran/cmd_select.hpp"
#include "rscran/ica_core.hpp"
#include "rscran/solver.hpp"

using namespace rscran;

namespace
{
// Minimal hand-built spec: maximize obj over the given pieces
SubproblemSpec scalar_spec(double quad, double lin, double constant)
{
    SubproblemSpec spec;
    spec.n = 1;
    spec.num_users = 0;
    spec.num_bs = 0;
    spec.antennas = 0;
    spec.lb = arma::vec{-arma::datum::inf};
    spec.ub = arma::vec{arma::datum::inf};
    spec.obj_quad_diag = arma::vec{quad};
    spec.obj_lin = arma::vec{lin};
    spec.obj_const = constant;
    spec.x0 = arma::vec{0.0};
    spec.wp_block = {};
    spec.wc_block = {};
    spec.gp_idx = {};
    spec.gc_idx = {};
    spec.dp_idx = {};
    spec.dc_idx = {};
    return spec;
}
} // namespace

TEST_CASE("solver: proximal-only objective returns the anchor", "[solver]")
{
    // maximize -rho |x - a|^2 over free x = a
    SubproblemSpec spec = scalar_spec(2.0e-3, 2.0e-3 * 4.2, -1e-3 * 4.2 * 4.2);
    spec.x0 = arma::vec{0.5};
    const PrimalSolution sol = solve(spec, 1e-9);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values(0) == Catch::Approx(4.2).margin(1e-5));
    CHECK(sol.objective == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("solver: active linear bound", "[solver]")
{
    // maximize -(x-3)^2 s.t. x <= 1  ->  x = 1
    SubproblemSpec spec = scalar_spec(2.0, 6.0, -9.0);
    Constraint c;
    c.family = ConstraintFamily::BackhaulCluster;
    c.lin = {{0, 1.0}};
    c.constant = -1.0;
    spec.constraints.push_back(c);
    const PrimalSolution sol = solve(spec, 1e-9);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values(0) == Catch::Approx(1.0).margin(1e-6));
    CHECK(sol.objective == Catch::Approx(-4.0).margin(1e-5));
}

TEST_CASE("solver: box bound via lb/ub instead of a constraint row", "[solver]")
{
    // maximize -(x-3)^2 with ub = 1
    SubproblemSpec spec = scalar_spec(2.0, 6.0, -9.0);
    spec.ub(0) = 1.0;
    const PrimalSolution sol = solve(spec, 1e-9);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values(0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("solver: assembled 2-user subproblem matches the dense reference", "[solver]")
{
    Rng rng(51);
    NetworkConfig cfg = oracle::desk_config(2, 2, 2);
    cfg.backhaul_capacity_mbps = 40.0;
    const ChannelState h = oracle::random_channels(2, 2, 2, rng, 1e-5);
    CmdSelectParams cp;
    cp.mu = 100.0;
    const CmdSets cmd = build_cmd_sets(h, cfg, cp);
    IcaParams params;
    const double theta = params.initial_theta(cfg);
    const SurrogatePoint anchor = make_alg2_anchor(h, cmd, cfg, true, theta, params);
    const arma::vec w2(2, arma::fill::ones);
    const SubproblemSpec spec = assemble_opt6(h, cmd, anchor, params, cfg, theta, true, w2);

    const PrimalSolution sol = solve(spec, 1e-7);
    REQUIRE(sol.status == SolveStatus::Optimal);

    const arma::vec x_ref = refsolve::solve_dense(spec);
    const double obj_ref = spec.eval_objective(x_ref);
    CHECK(sol.objective == Catch::Approx(obj_ref).epsilon(1e-5));
    CHECK(sol.objective >= obj_ref - std::abs(obj_ref) * 1e-5);
}

TEST_CASE("solver: determinism and independent feasibility of the result", "[solver]")
{
    Rng rng(52);
    NetworkConfig cfg = oracle::desk_config(2, 3, 2);
    cfg.backhaul_capacity_mbps = 60.0;
    const ChannelState h = oracle::random_channels(2, 3, 2, rng, 1e-5);
    CmdSelectParams cp;
    cp.mu = 50.0;
    const CmdSets cmd = build_cmd_sets(h, cfg, cp);
    IcaParams params;
    const double theta = params.initial_theta(cfg);
    const SurrogatePoint anchor = make_alg2_anchor(h, cmd, cfg, true, theta, params);
    const arma::vec w3(3, arma::fill::ones);
    const SubproblemSpec spec = assemble_opt6(h, cmd, anchor, params, cfg, theta, true, w3);

    const PrimalSolution a = solve(spec, 1e-7);
    const PrimalSolution b = solve(spec, 1e-7);
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(arma::norm(a.values - b.values) == 0.0);
    CHECK(a.objective == b.objective);
    CHECK(a.kkt_residual <= 1e-7);

    for (const auto &c : spec.constraints)
        REQUIRE(spec.eval_constraint(c, a.values) <=
                1e-6 * std::max(1.0, std::abs(c.constant)));
    for (int j = 0; j < spec.n; ++j)
    {
        REQUIRE(a.values(j) >= spec.lb(j) - 1e-12);
        REQUIRE(a.values(j) <= spec.ub(j) + 1e-12);
    }
}

TEST_CASE("solver: opt7 subproblem with fixed clusters solves and stays feasible", "[solver]")
{
    Rng rng(53);
    NetworkConfig cfg = oracle::desk_config(2, 2, 2);
    cfg.backhaul_capacity_mbps = 50.0;
    const ChannelState h = oracle::random_channels(2, 2, 2, rng, 1e-5);
    const CmdSets cmd = CmdSets::tin(2);
    IcaParams params;
    const ClusterAssignment clusters = ClusterAssignment::all(2, 2);

    SurrogatePoint anchor;
    anchor.w = mrc_beamformers(h, cfg, false);
    anchor.w.wp *= 0.5;
    anchor.gamma_p.set_size(2);
    for (int k = 0; k < 2; ++k)
        anchor.gamma_p(k) = sinr_private(h, anchor.w, cmd, k, cfg.noise_power_w());
    // rates may exceed the backhaul at MRC; pull the anchors inside
    for (int guard = 0; guard < 50; ++guard)
    {
        const double load = std::log2(1.0 + anchor.gamma_p(0)) +
                            std::log2(1.0 + anchor.gamma_p(1));
        if (load <= 0.99 * cfg.backhaul_bps() / cfg.bandwidth_hz)
            break;
        anchor.gamma_p *= 0.5;
    }

    const arma::vec w2(2, arma::fill::ones);
    const SubproblemSpec spec = assemble_opt7(h, cmd, clusters, anchor, params, cfg, false, w2);
    const PrimalSolution sol = solve(spec, 1e-7);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const arma::vec x_ref = refsolve::solve_dense(spec);
    CHECK(sol.objective == Catch::Approx(spec.eval_objective(x_ref)).epsilon(1e-5));
}
