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
#include "rscran/subproblem.hpp"

namespace rscran
{

/// Anchor tuple around which each convex subproblem is built. Beamformers are
/// in physical units; gamma holds per-user SINR targets; t/d are the l0 and
/// rate slack anchors (empty outside the clustering problem).
struct SurrogatePoint
{
    BeamformerSet w;
    arma::vec gamma_p, gamma_c; ///< K each (gamma_c unused under TIN)
    arma::mat t_p, t_c;         ///< N x K
    arma::vec d_p, d_c;         ///< K
};

struct IcaParams
{
    double rho1 = 1e-4;          ///< proximal weight on beamformers
    double rho2 = 1e-4;          ///< proximal weight on SINR variables
    double theta0 = 0.0;         ///< initial smoothing; 0 selects 1e-2 * p_max
    double delta = 0.5;          ///< theta annealing factor, in (0,1)
    double xi = 1e-6;            ///< smoothing floor
    double beta_exponent = 0.6;  ///< beta_v = 1/(v+2)^beta_exponent
    int max_iterations = 100;
    double stationarity_tol = 1e-4; ///< relative sup-norm on solution - anchor
    double solver_tol = 1e-7;
    double gamma_floor = 1e-8;        ///< box floor on SINR variables
    double gamma_anchor_floor = 1e-6; ///< anchors below this mark a stream dead

    void validate() const;
    double initial_theta(const NetworkConfig &config) const;
};

/// Step size sequence for the anchor averaging; satisfies beta in (0,1],
/// beta -> 0, sum beta = inf.
double beta_step(const IcaParams &params, int v);

/// Smooth arctan surrogate of the l0 indicator, in [0, 1)
double f_theta(double x, double theta);
double f_theta_grad(double x, double theta);

/// 0.5[(t+d)^2 - t^2 - d^2]; identical to t*d
double bilinear_split(double t, double d);

struct AffineExpr
{
    double slope = 0.0, intercept = 0.0;
    double eval(double v) const
    {
        return slope * v + intercept;
    }
};

/// Tangent of f_theta at the anchor squared-norm; convex upper bound of
/// f_theta(|w|^2) as a function of |w|^2.
AffineExpr linearize_ftheta_expr(double anchor_norm_sq, double theta);
double linearize_ftheta(const arma::cx_vec &w, const arma::cx_vec &w_anchor, double theta);

/// Tangent of log2(1+gamma) at gamma_tilde; upper bound for all gamma > -1
AffineExpr linearize_log_expr(double gamma_tilde);
double linearize_log(double gamma, double gamma_tilde);

/// Affine lower bound of |h^H w|^2 / gamma around (w_tilde, gamma_tilde)
double qol_lower_bound(const arma::cx_vec &h, const arma::cx_vec &w, double gamma,
                       const arma::cx_vec &w_tilde, double gamma_tilde);

/// Convexified per-BS backhaul surrogate (bilinear budget vs C_n/B)
double g2_tilde(const arma::mat &t_p, const arma::mat &t_c, const arma::vec &d_p,
                const arma::vec &d_c, const SurrogatePoint &anchor, int n, double cn_bps,
                double bandwidth_hz);

/// Private-SINR surrogate constraint value (<= 0 implies the exact constraint)
double g7_tilde(const ChannelState &h, const CmdSets &cmd, const BeamformerSet &w,
                double gamma_pk, const SurrogatePoint &anchor, int k, double sigma2_w);

/// Common-SINR surrogate for (owner, decoder); decoder must be in m[owner]
double g8_tilde(const ChannelState &h, const CmdSets &cmd, const BeamformerSet &w,
                double gamma_ck, const SurrogatePoint &anchor, int owner, int decoder,
                double sigma2_w);

/// Proximal regularizer distance to the anchor
double g9_prox(const BeamformerSet &w, const arma::vec &gamma_p, const arma::vec &gamma_c,
               const SurrogatePoint &anchor, double rho1, double rho2);

/// Clustering subproblem (35): full beamformer support plus (t, d) slacks
SubproblemSpec assemble_opt6(const ChannelState &h, const CmdSets &cmd,
                             const SurrogatePoint &anchor, const IcaParams &params,
                             const NetworkConfig &config, double theta, bool include_common,
                             const arma::vec &weights);

/// Fixed-cluster beamforming subproblem (43): group-sparse beamformers,
/// affine backhaul. Users left unservable are reported via unserved.
SubproblemSpec assemble_opt7(const ChannelState &h, const CmdSets &cmd,
                             const ClusterAssignment &clusters, const SurrogatePoint &anchor,
                             const IcaParams &params, const NetworkConfig &config,
                             bool include_common, const arma::vec &weights,
                             std::vector<int> *unserved = nullptr);

/// Solution vector mapped back to a SurrogatePoint (absent coordinates take
/// their pinned values).
SurrogatePoint unpack_solution(const SubproblemSpec &spec, const arma::vec &x,
                               const IcaParams &params);

/// Per-coordinate convex combination anchor + beta (solution - anchor)
SurrogatePoint step_update(const SurrogatePoint &anchor, const SurrogatePoint &solution,
                           double beta);

/// Exact weighted sum-rate at the anchor's assigned SINR targets, bits/s
double anchor_wsr(const SurrogatePoint &anchor, const arma::vec &weights,
                  const NetworkConfig &config);

} // namespace rscran
