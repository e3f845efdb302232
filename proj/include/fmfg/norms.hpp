#pragma once

#include "fmfg/grid.hpp"

namespace fmfg {

/// Weighted total variation h * sum <x_i>^k |mu_i| of a signed grid measure.
double tv_k(const Grid& grid, const GridFunction& mu, double k);

/// Weighted oscillation seminorm sup_{i,j} |v_i - v_j| / (<x_i>^k + <x_j>^k).
double osc_k(const Grid& grid, const GridFunction& v, double k);

/// inf over constants c of max_i |v_i + c| / <x_i>^k.
double shifted_sup_k(const Grid& grid, const GridFunction& v, double k);

/// max_i |Dv_i| / <x_i>^k with the grid gradient.
double grad_linf_k(const Grid& grid, const GridFunction& v, double k);

/// Bounded-Lipschitz distance between two grid measures (node masses h * mu_i):
/// sup of sum f_i (mu_i - nu_i) h over |f_i| <= 1, |f_{i+1} - f_i| <= h.
/// Solved exactly by dynamic programming over the lattice that carries the
/// vertices of this linear program.
double d0(const Grid& grid, const GridFunction& mu, const GridFunction& nu);

/// max over columns of d0 between two time fields of densities. Columns whose cheap
/// upper bound min(TV, W1) cannot beat the running maximum are skipped.
double sup_d0(const Grid& grid, const TimeField& a, const TimeField& b);

/// Wasserstein-1 distance of two grid measures of equal mass.
double w1(const Grid& grid, const GridFunction& mu, const GridFunction& nu);

}  // namespace fmfg
