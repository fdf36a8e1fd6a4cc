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

#include "rscran/subproblem.hpp"

namespace rscran
{

std::complex<double> SubproblemSpec::block_dot(const arma::vec &x, int block,
                                               const arma::cx_vec &h) const
{
    // h^H w with w stored as [Re; Im] at the block offset
    const WBlockInfo &b = wblocks[block];
    const int r = static_cast<int>(b.rows.n_elem);
    double re = 0.0, im = 0.0;
    for (int i = 0; i < r; ++i)
    {
        const double hr = h(i).real(), hi = h(i).imag();
        const double wr = x(b.offset + i), wi = x(b.offset + r + i);
        re += hr * wr + hi * wi;
        im += hr * wi - hi * wr;
    }
    return {re, im};
}

arma::cx_vec SubproblemSpec::get_w(const arma::vec &x, int block) const
{
    const WBlockInfo &b = wblocks[block];
    const int r = static_cast<int>(b.rows.n_elem);
    arma::cx_vec w(r);
    for (int i = 0; i < r; ++i)
        w(i) = {x(b.offset + i), x(b.offset + r + i)};
    return w;
}

void SubproblemSpec::set_w(arma::vec &x, int block, const arma::cx_vec &w) const
{
    const WBlockInfo &b = wblocks[block];
    const int r = static_cast<int>(b.rows.n_elem);
    for (int i = 0; i < r; ++i)
    {
        x(b.offset + i) = w(i).real();
        x(b.offset + r + i) = w(i).imag();
    }
}

double SubproblemSpec::eval_constraint(const Constraint &c, const arma::vec &x) const
{
    double v = c.constant;
    for (const auto &t : c.rank1)
        v += t.coeff * std::norm(block_dot(x, t.block, t.h));
    for (const auto &t : c.diag)
    {
        double s = 0.0;
        for (arma::uword idx : t.coords)
            s += x(idx) * x(idx);
        v += t.coeff * s;
    }
    for (const auto &t : c.pairs)
    {
        const double s = x(t.i) + x(t.j);
        v += t.coeff * s * s;
    }
    for (const auto &[idx, coef] : c.lin)
        v += coef * x(idx);
    return v;
}

double SubproblemSpec::eval_objective(const arma::vec &x) const
{
    double quad = 0.0;
    for (int i = 0; i < n; ++i)
        quad += obj_quad_diag(i) * x(i) * x(i);
    return arma::dot(obj_lin, x) - 0.5 * quad + obj_const;
}

} // namespace rscran
