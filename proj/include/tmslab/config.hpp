#pragma once

#include <cstddef>

// Central table of numeric defaults. The CLI and the acceptance suite read
// these; change them here and nowhere else.
namespace tms::defaults {

inline constexpr std::size_t enumeration_cap = 64;

inline constexpr double eigen_tol = 1e-13;
inline constexpr std::size_t eigen_max_iter = 1'000'000;

inline constexpr double root_tol = 1e-8;

// Central-difference step for p''. One Richardson level on top.
inline constexpr double fd_step = 1e-3;

inline constexpr double newton_min_curvature = 1e-12;
inline constexpr double legendre_t_cap = 500.0;

inline constexpr double prob_clamp = 1e-300;

inline constexpr std::size_t covariance_max_terms = 10'000;

// Renewal escape windows are [n, n^kappa].
inline constexpr double escape_kappa = 4.0;

inline constexpr double holder_beta = 1.0;

inline constexpr std::size_t max_table_entries = std::size_t{1} << 22;

}  // namespace tms::defaults
