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

#include "rscran/subproblem.hpp"

namespace rscran
{

enum class SolveStatus
{
    Optimal,
    Infeasible,
    NumericalTrouble,
};

struct PrimalSolution
{
    arma::vec values;          ///< full variable vector in the spec layout
    double objective = 0.0;    ///< maximization objective at values
    SolveStatus status = SolveStatus::NumericalTrouble;
    double kkt_residual = 0.0; ///< max of scaled primal/dual/complementarity residuals
    int iterations = 0;
};

/// Solves the convex subproblem to the requested KKT tolerance with a
/// primal-dual interior-point method. The Newton systems exploit the
/// block-diagonal Hessian structure (per-beamformer blocks, dense t/d block)
/// with a low-rank Schur complement over the constraint gradients.
///
/// The anchor spec.x0 seeds the iteration; it does not have to be strictly
/// feasible. Feasibility of the returned point is rechecked independently of
/// the internal bookkeeping before the Optimal status is reported.
PrimalSolution solve(const SubproblemSpec &spec, double solver_tol = 1e-7);

} // namespace rscran
