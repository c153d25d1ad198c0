/*
 * Copyright 2026 The dispclutter Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Random perturbation field on the log-relaxation-time axis u = log(tau):
// grid and quadrature, Matern covariance, Gaussian sampling and the
// Karhunen-Loeve decomposition of the covariance operator.

#ifndef DISPCLUTTER_RELAXATION_FIELD_HPP
#define DISPCLUTTER_RELAXATION_FIELD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dispclutter/core.hpp"
#include "dispclutter/rng.hpp"

namespace dispclutter {

/// Discretized u-axis with positive quadrature weights.
class LogTauGrid {
public:
    LogTauGrid(RealVector points, RealVector weights)
        : points_(std::move(points)), weights_(std::move(weights)) {
        detail::require(points_.size() >= 2, ErrorKind::InvalidArgument, "LogTauGrid: need at least 2 points");
        detail::require(points_.size() == weights_.size(), ErrorKind::InvalidArgument,
                        "LogTauGrid: points/weights length mismatch");
        for (Eigen::Index i = 0; i < points_.size(); ++i) {
            detail::require(std::isfinite(points_[i]), ErrorKind::InvalidArgument, "LogTauGrid: non-finite point");
            detail::require(weights_[i] > 0.0, ErrorKind::InvalidArgument, "LogTauGrid: weights must be > 0");
            if (i > 0)
                detail::require(points_[i] > points_[i - 1], ErrorKind::InvalidArgument,
                                "LogTauGrid: points must be strictly increasing");
        }
    }

    /// Uniform grid on [lo, hi] with trapezoid weights.
    static LogTauGrid uniform(double lo, double hi, Eigen::Index n) {
        detail::require(n >= 2, ErrorKind::InvalidArgument, "LogTauGrid::uniform: n must be >= 2");
        detail::require(hi > lo, ErrorKind::InvalidArgument, "LogTauGrid::uniform: hi must exceed lo");
        RealVector pts = RealVector::LinSpaced(n, lo, hi);
        const double step = (hi - lo) / static_cast<double>(n - 1);
        RealVector w = RealVector::Constant(n, step);
        w[0] = w[n - 1] = 0.5 * step;
        return LogTauGrid(std::move(pts), std::move(w));
    }

    /// Default relaxation-time support: 10 ps .. 100 ns, 128 points.
    static LogTauGrid default_grid() { return uniform(std::log(1e-11), std::log(1e-7), 128); }

    Eigen::Index size() const noexcept { return points_.size(); }
    const RealVector& points() const noexcept { return points_; }
    const RealVector& weights() const noexcept { return weights_; }
    double span() const { return points_[size() - 1] - points_[0]; }

    bool operator==(const LogTauGrid& other) const {
        return points_.size() == other.points_.size() && points_ == other.points_ && weights_ == other.weights_;
    }

private:
    RealVector points_;
    RealVector weights_;
};

inline void require_same_grid(const LogTauGrid& a, const LogTauGrid& b, const char* where) {
    detail::require(a == b, ErrorKind::GridMismatch, std::string(where) + ": grids differ");
}

struct MaternParams {
    double sigma_g = 0.03;
    double nu = 1.5;
    double ell = 1.0;

    static bool supported_nu(double nu) {
        for (double s : {0.5, 1.5, 2.5})
            if (std::abs(nu - s) <= 1e-12) return true;
        return false;
    }

    void validate() const {
        detail::require(std::isfinite(sigma_g) && sigma_g >= 0.0, ErrorKind::InvalidArgument,
                        "MaternParams: sigma_g must be >= 0");
        detail::require(std::isfinite(ell) && ell > 0.0, ErrorKind::InvalidArgument, "MaternParams: ell must be > 0");
        detail::require(supported_nu(nu), ErrorKind::UnsupportedSmoothness,
                        "MaternParams: nu must be one of 0.5, 1.5, 2.5 (got " + std::to_string(nu) + ")");
    }
};

/// sigma_g^2 * kappa_{nu,ell}(|h|) using the half-integer closed forms.
inline double matern_kernel(double h, const MaternParams& params) {
    params.validate();
    const double var = params.sigma_g * params.sigma_g;
    const double a = std::abs(h) / params.ell;
    if (a == 0.0) return var;
    if (std::abs(params.nu - 0.5) <= 1e-12) return var * std::exp(-a);
    if (std::abs(params.nu - 1.5) <= 1e-12) {
        const double s = std::sqrt(3.0) * a;
        return var * (1.0 + s) * std::exp(-s);
    }
    const double s = std::sqrt(5.0) * a;
    return var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

/// Real symmetric covariance K(u_i, u_j) over the grid points.
struct KernelMatrix {
    RealMatrix entries;
    LogTauGrid grid;
    MaternParams params;
};

inline KernelMatrix build_kernel_matrix(const LogTauGrid& grid, const MaternParams& params) {
    params.validate();
    const Eigen::Index n = grid.size();
    RealMatrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = matern_kernel(0.0, params);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = matern_kernel(grid.points()[i] - grid.points()[j], params);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return KernelMatrix{std::move(k), grid, params};
}

/// Eigenpairs of a real symmetric PSD matrix in non-increasing order, with the
/// jitter policy applied: values in [-1e-12 * lambda_max, 0) are clamped to 0,
/// anything more negative is rejected.
struct SymmetricEigen {
    RealVector values;
    RealMatrix vectors;
};

inline SymmetricEigen psd_eigen(const RealMatrix& a, const char* where) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(a);
    detail::require(solver.info() == Eigen::Success, ErrorKind::NotPositiveSemidefinite,
                    std::string(where) + ": eigensolver failed");
    const Eigen::Index n = a.rows();
    SymmetricEigen out{RealVector(n), RealMatrix(n, n)};
    // Eigen returns ascending order.
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = solver.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    const double lmax = std::max(out.values[0], 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double& v = out.values[i];
        if (v < 0.0) {
            detail::require(v >= -1e-12 * lmax, ErrorKind::NotPositiveSemidefinite,
                            std::string(where) + ": eigenvalue " + std::to_string(v) + " below jitter floor");
            v = 0.0;
        }
    }
    return out;
}

/// One sample of the perturbation field over the grid.
struct FieldRealization {
    RealVector values;
    std::string seed_tag;
};

/// Symmetric square-root factor F with F F^T = K, built once and reused
/// for every realization.
class FieldSampler {
public:
    explicit FieldSampler(const KernelMatrix& kernel) : grid_(kernel.grid) {
        auto eig = psd_eigen(kernel.entries, "sample_field");
        factor_ = eig.vectors * eig.values.cwiseSqrt().asDiagonal();
    }

    const LogTauGrid& grid() const noexcept { return grid_; }

    FieldRealization draw(const SeedStream& stream, std::uint64_t index) const {
        return FieldRealization{factor_ * stream.standard_normals(index, factor_.cols()), stream.tag(index)};
    }

    /// Realizations first_index .. first_index+count-1. Each index owns its
    /// sub-stream and output slot, so the result does not depend on `threads`.
    std::vector<FieldRealization> draw_many(const SeedStream& stream, std::size_t count,
                                            std::uint64_t first_index = 0, unsigned threads = 1) const {
        std::vector<FieldRealization> out(count);
        threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
        if (threads == 1) {
            for (std::size_t i = 0; i < count; ++i) out[i] = draw(stream, first_index + i);
            return out;
        }
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < count; i += threads) out[i] = draw(stream, first_index + i);
            });
        }
        for (auto& th : pool) th.join();
        return out;
    }

private:
    LogTauGrid grid_;
    RealMatrix factor_;
};

inline std::vector<FieldRealization> sample_field(const KernelMatrix& kernel, const SeedStream& stream,
                                                  std::size_t count, unsigned threads = 1) {
    detail::require(count >= 1, ErrorKind::InvalidArgument, "sample_field: count must be >= 1");
    return FieldSampler(kernel).draw_many(stream, count, 0, threads);
}

/// Discrete KL basis: eigenfunctions are orthonormal under the grid quadrature,
/// sum_u w_u phi_q(u) phi_p(u) = delta_qp.
struct KLBasis {
    RealVector eigenvalues;
    RealMatrix eigenfunctions;  // column q = phi_q sampled on the grid
    LogTauGrid grid;

    Eigen::Index modes() const noexcept { return eigenvalues.size(); }
};

/// Solves the weighted eigenproblem of the integral operator with kernel K
/// through the symmetric form W^{1/2} K W^{1/2}.
inline KLBasis kl_decompose(const KernelMatrix& kernel) {
    const RealVector sqrt_w = kernel.grid.weights().cwiseSqrt();
    const RealMatrix sym = sqrt_w.asDiagonal() * kernel.entries * sqrt_w.asDiagonal();
    auto eig = psd_eigen(0.5 * (sym + sym.transpose()), "kl_decompose");
    RealMatrix phi = sqrt_w.cwiseInverse().asDiagonal() * eig.vectors;
    return KLBasis{std::move(eig.values), std::move(phi), kernel.grid};
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_RELAXATION_FIELD_HPP
