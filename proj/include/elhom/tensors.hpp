#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "elhom/common.hpp"

namespace elhom {

/// Fourth-order tensor a[i][j][alpha][beta] (0-based indices). Acting on a
/// displacement gradient G(beta, j) it produces the flux
/// S(alpha, i) = a[i][j][alpha][beta] G(beta, j).
template <int D>
class Tensor4 {
public:
    static constexpr int kSize = D * D * D * D;

    Tensor4() { a_.fill(0.0); }

    double &operator()(int i, int j, int alpha, int beta) {
        return a_[((i * D + j) * D + alpha) * D + beta];
    }
    double operator()(int i, int j, int alpha, int beta) const {
        return a_[((i * D + j) * D + alpha) * D + beta];
    }

    Mat<D> apply(const Mat<D> &grad) const;
    /// a[i][j][alpha][beta] xi(alpha, i) xi(beta, j)
    double energy(const Mat<D> &xi) const;
    double max_abs() const;

    Tensor4 &operator+=(const Tensor4 &o) {
        for (int k = 0; k < kSize; ++k) a_[k] += o.a_[k];
        return *this;
    }
    Tensor4 &operator-=(const Tensor4 &o) {
        for (int k = 0; k < kSize; ++k) a_[k] -= o.a_[k];
        return *this;
    }
    Tensor4 &operator*=(double s) {
        for (double &v : a_) v *= s;
        return *this;
    }
    friend Tensor4 operator+(Tensor4 a, const Tensor4 &b) { return a += b; }
    friend Tensor4 operator-(Tensor4 a, const Tensor4 &b) { return a -= b; }
    friend Tensor4 operator*(double s, Tensor4 a) { return a *= s; }
    bool operator==(const Tensor4 &o) const { return a_ == o.a_; }

    const std::array<double, kSize> &data() const { return a_; }
    std::array<double, kSize> &data() { return a_; }

private:
    std::array<double, kSize> a_;
};

/// Elasticity tensors are Tensor4 values expected to carry the full symmetry
/// a[i][j][alpha][beta] = a[j][i][beta][alpha] = a[alpha][j][i][beta].
template <int D> using ElasticityTensor = Tensor4<D>;

struct SymmetryViolation {
    /// 0: a[i][j][al][be] vs a[j][i][be][al]
    /// 1: a[i][j][al][be] vs a[al][j][i][be]
    /// 2: a[i][j][al][be] vs a[i][be][al][j]
    int identity = 0;
    std::array<int, 4> index{};
    std::array<int, 4> partner{};
    double value = 0.0;
    double partner_value = 0.0;
};

/// Every quadruple violating one of the three symmetry identities by more
/// than `tol` (absolute). Empty iff the tensor is symmetric.
template <int D>
std::vector<SymmetryViolation> validate_symmetries(const Tensor4<D> &t, double tol = 0.0);

/// Largest absolute mismatch over the symmetry identities selected by the
/// bit mask (bit k for identity k).
template <int D> double symmetry_residual(const Tensor4<D> &t, unsigned identities = 0b111);

struct EllipticityBounds {
    double kappa1 = 0.0;
    double kappa2 = 0.0;

    EllipticityBounds() = default;
    EllipticityBounds(double k1, double k2);
};

/// a = lambda d_{i alpha} d_{j beta} + mu (d_ij d_{alpha beta} + d_{i beta} d_{j alpha})
template <int D> ElasticityTensor<D> isotropic_tensor(double lambda, double mu);

/// Componentwise-decoupled tensor a d_ij d_{alpha beta}; the vector analogue of
/// a scalar conductivity. It is not an elasticity tensor (fails the i<->alpha
/// identity) and is used only as a closed-form surrogate.
template <int D> Tensor4<D> scalar_surrogate_tensor(double a);

/// Sharp constants of the two ellipticity inequalities for one tensor:
/// kappa1 = min over symmetric xi of A xi:xi / |xi + xi^T|^2,
/// kappa2 = max over all xi of A xi:xi / |xi|^2.
template <int D> EllipticityBounds exact_bounds(const Tensor4<D> &t);

enum class CoefficientKind { constant, laminate, checkerboard, smooth_trigonometric };

std::string to_string(CoefficientKind kind);

/// A 1-periodic tensor field y -> A(y) from the catalog. Immutable.
template <int D>
class CoefficientField {
public:
    static CoefficientField constant(const Tensor4<D> &a);
    /// Phase p occupies (breakpoints[p], breakpoints[p+1]] along `direction`
    /// (0-based axis), wrapping periodically. Breakpoints strictly increasing
    /// inside [-1/2, 1/2).
    static CoefficientField laminate(int direction, std::vector<Tensor4<D>> phases,
                                     std::vector<double> breakpoints);
    /// Two isotropic half-cell phases (lambda, mu) and (c lambda, c mu).
    static CoefficientField laminate_contrast(int direction, double lambda, double mu,
                                              double contrast);
    static CoefficientField checkerboard(double lambda, double mu, double contrast);
    /// lambda(y) = lambda (1 + amp cos 2 pi y_1),
    /// mu(y) = mu (1 + amp sin 2 pi y_1 prod_{k>1} cos 2 pi y_k), |amp| < 1.
    static CoefficientField smooth_trigonometric(double lambda, double mu, double amplitude);

    Tensor4<D> evaluate(const Point<D> &y) const;
    /// True when y lies within `tol` of a coefficient jump.
    bool on_discontinuity(const Point<D> &y, double tol = 1e-12) const;

    CoefficientKind kind() const { return kind_; }
    const EllipticityBounds &declared_bounds() const { return bounds_; }
    int direction() const { return direction_; }
    const std::vector<Tensor4<D>> &phases() const { return phases_; }
    const std::vector<double> &breakpoints() const { return breakpoints_; }
    double lambda() const { return lambda_; }
    double mu() const { return mu_; }
    double parameter() const { return param_; }

private:
    CoefficientKind kind_ = CoefficientKind::constant;
    std::vector<Tensor4<D>> phases_;
    std::vector<double> breakpoints_;
    int direction_ = 0;
    double lambda_ = 0.0, mu_ = 0.0, param_ = 0.0;
    EllipticityBounds bounds_;
};

/// Wrap a coordinate into the half-open cell (-1/2, 1/2].
double wrap_cell(double y);

struct ProbeResult {
    double kappa1_est = 0.0;
    double kappa2_est = 0.0;
};

/// Random sampling of the two ellipticity quotients over cell points and
/// unit matrices. Throws NonElliptic when a symmetric quotient is <= 0.
template <int D>
ProbeResult ellipticity_probe(const CoefficientField<D> &field, int sample_count,
                              std::uint64_t seed);

/// Catalog lookup: "constant", "laminate", "checkerboard", "smooth".
/// Parameters: lambda, mu, contrast, direction (1-based), amplitude, scalar.
template <int D>
CoefficientField<D> make_coefficient(const std::string &name, const nlohmann::json &params);

template <int D> nlohmann::json tensor_to_json(const Tensor4<D> &t);
template <int D> Tensor4<D> tensor_from_json(const nlohmann::json &j);

} // namespace elhom
