#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>

#include "elhom/errors.hpp"

#ifndef ELHOM_DIM
#define ELHOM_DIM 2
#endif

namespace elhom {

/// Spatial dimension the tools and bindings are built for.
inline constexpr int kDim = ELHOM_DIM;

using Index = std::ptrdiff_t;

template <int D> using Point = Eigen::Matrix<double, D, 1>;
template <int D> using Vec = Eigen::Matrix<double, D, 1>;
/// Displacement gradients are stored as G(alpha, i) = d u^alpha / d x_i.
template <int D> using Mat = Eigen::Matrix<double, D, D>;

template <int D> using MultiIndex = std::array<Index, D>;

constexpr int ipow(int base, int exp) {
    int r = 1;
    for (int k = 0; k < exp; ++k) r *= base;
    return r;
}

} // namespace elhom
