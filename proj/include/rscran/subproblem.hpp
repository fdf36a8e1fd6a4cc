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

#include <utility>
#include <vector>

#include <armadillo>

namespace rscran
{

/// Interchange layout version consumed by the solver adapter
inline constexpr int kSubproblemLayoutVersion = 1;

enum class ConstraintFamily
{
    Power,            ///< per-BS transmit power
    BackhaulBilinear, ///< g2-tilde, convexified t*d budget
    FthetaPrivate,    ///< g3-tilde, linearized l0 surrogate vs t slack
    FthetaCommon,     ///< g4-tilde
    LogPrivate,       ///< g5-tilde, linearized log vs d slack
    LogCommon,        ///< g6-tilde
    SinrPrivate,      ///< g7-tilde, QoL-bounded private SINR
    SinrCommon,       ///< g8-tilde, QoL-bounded common SINR per (decoder, owner)
    BackhaulCluster,  ///< g10, affine backhaul over fixed clusters
    NormEpigraph,     ///< |w_block at BS n|^2 <= p slack (SOC reduction)
};

/// coeff * |h^H w_block|^2, h restricted to the block's active rows
struct RankOneTerm
{
    int block;
    arma::cx_vec h;
    double coeff;
};

/// coeff * sum of squares over the listed variable indices
struct DiagTerm
{
    arma::uvec coords;
    double coeff;
};

/// coeff * (x_i + x_j)^2
struct PairTerm
{
    int i, j;
    double coeff;
};

using SparseLin = std::vector<std::pair<int, double>>;

/// One convex constraint g(x) <= 0 built from quadratic atoms plus an affine
/// part. Every atom has coeff >= 0, so g is convex by construction.
struct Constraint
{
    ConstraintFamily family;
    int tag_a = -1; ///< BS or user index, family dependent
    int tag_b = -1; ///< second index (decoder for SinrCommon)
    std::vector<RankOneTerm> rank1;
    std::vector<DiagTerm> diag;
    std::vector<PairTerm> pairs;
    SparseLin lin;
    double constant = 0.0;
};

/// A complex beamformer block in the real variable vector: the block holds
/// [Re(w_rows); Im(w_rows)] starting at offset.
struct WBlockInfo
{
    int user;
    bool common;
    arma::uvec rows; ///< active complex rows (subset of 0..N*L-1)
    int offset;
    int dim; ///< 2 * rows.n_elem
};

/// Convex subproblem in the form
///   maximize  obj_lin.x - 0.5 x' diag(obj_quad_diag) x + obj_const
///   s.t.      g_i(x) <= 0,  lb <= x <= ub
/// All constraints are convex-quadratic (SOC-representable); the proximal
/// curvature in obj_quad_diag makes the objective strongly concave in the
/// beamformer and SINR coordinates.
struct SubproblemSpec
{
    int layout_version = kSubproblemLayoutVersion;
    int n = 0;
    int num_users = 0, num_bs = 0, antennas = 0;
    bool include_common = false;

    std::vector<WBlockInfo> wblocks;
    std::vector<int> wp_block, wc_block; ///< per user; -1 when absent
    std::vector<int> gp_idx, gc_idx;     ///< per user; -1 when pinned/absent
    arma::imat tp_idx, tc_idx;           ///< N x K var indices, -1 when absent
    arma::imat pp_idx, pc_idx;           ///< per-BS block power slacks, -1 when absent
    std::vector<int> dp_idx, dc_idx;
    int td_begin = 0, td_count = 0;      ///< dense (t, d) Hessian region

    arma::vec lb, ub;
    arma::vec obj_lin;
    arma::vec obj_quad_diag;
    double obj_const = 0.0;
    std::vector<Constraint> constraints;
    arma::vec x0; ///< anchor mapped into this layout

    std::complex<double> block_dot(const arma::vec &x, int block, const arma::cx_vec &h) const;
    arma::cx_vec get_w(const arma::vec &x, int block) const;
    void set_w(arma::vec &x, int block, const arma::cx_vec &w) const;
    double eval_constraint(const Constraint &c, const arma::vec &x) const;
    double eval_objective(const arma::vec &x) const;
};

} // namespace rscran
