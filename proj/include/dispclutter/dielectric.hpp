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

// Continuous relaxation-spectrum permittivity. All permittivities here are
// relative (dimensionless); time convention exp(+j w t), so passive media
// have Im(eps) <= 0.

#ifndef DISPCLUTTER_DIELECTRIC_HPP
#define DISPCLUTTER_DIELECTRIC_HPP

#include <cmath>
#include <span>

#include "dispclutter/core.hpp"
#include "dispclutter/relaxation_field.hpp"

namespace dispclutter {

struct NominalSpectrum {
    double eps_inf = 4.0;
    RealVector gbar;  // nominal density over the grid

    void validate(const LogTauGrid& grid) const {
        detail::require(eps_inf >= 1.0, ErrorKind::InvalidArgument, "NominalSpectrum: eps_inf must be >= 1");
        detail::require(gbar.size() == grid.size(), ErrorKind::GridMismatch,
                        "NominalSpectrum: density length differs from grid");
        detail::require((gbar.array() >= 0.0).all(), ErrorKind::InvalidArgument,
                        "NominalSpectrum: density must be non-negative");
    }

    /// Gaussian bump in u centred at `center_u` with standard deviation `width`,
    /// scaled so that its quadrature integral equals `strength`.
    static NominalSpectrum gaussian_bump(const LogTauGrid& grid, double eps_inf, double center_u,
                                         double width, double strength) {
        detail::require(width > 0.0 && strength >= 0.0, ErrorKind::InvalidArgument,
                        "NominalSpectrum::gaussian_bump: width > 0 and strength >= 0 required");
        RealVector g = ((grid.points().array() - center_u) / width).square().unaryExpr([](double x) {
            return std::exp(-0.5 * x);
        });
        const double mass = grid.weights().dot(g);
        if (mass > 0.0) g *= strength / mass;
        NominalSpectrum s{eps_inf, std::move(g)};
        s.validate(grid);
        return s;
    }
};

inline void require_frequency(double omega, const char* where) {
    detail::require(std::isfinite(omega) && omega > 0.0, ErrorKind::InvalidFrequency,
                    std::string(where) + ": angular frequency must be > 0");
}

/// Quadrature-weighted Debye kernel D(w,u) = w_u / (1 + j w e^u).
struct DebyeRow {
    double omega;
    ComplexVector weights_times_kernel;

    DebyeRow(const LogTauGrid& grid, double omega_) : omega(omega_), weights_times_kernel(grid.size()) {
        require_frequency(omega, "DebyeRow");
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            weights_times_kernel[i] = grid.weights()[i] / (1.0 + kJ * omega * std::exp(grid.points()[i]));
    }

    cdouble apply(const RealVector& density) const {
        cdouble acc = 0.0;
        for (Eigen::Index i = 0; i < density.size(); ++i) acc += weights_times_kernel[i] * density[i];
        return acc;
    }
};

/// Rows of DebyeRow for a list of angular frequencies (one row per frequency).
inline ComplexMatrix debye_matrix(const LogTauGrid& grid, std::span<const double> omegas) {
    ComplexMatrix d(static_cast<Eigen::Index>(omegas.size()), grid.size());
    for (std::size_t m = 0; m < omegas.size(); ++m)
        d.row(static_cast<Eigen::Index>(m)) = DebyeRow(grid, omegas[m]).weights_times_kernel.transpose();
    return d;
}

inline cdouble nominal_permittivity(const NominalSpectrum& spectrum, const LogTauGrid& grid, double omega) {
    require_frequency(omega, "nominal_permittivity");
    spectrum.validate(grid);
    return spectrum.eps_inf + DebyeRow(grid, omega).apply(spectrum.gbar);
}

inline cdouble perturb_permittivity(const FieldRealization& realization, const LogTauGrid& grid, double omega) {
    require_frequency(omega, "perturb_permittivity");
    detail::require(realization.values.size() == grid.size(), ErrorKind::GridMismatch,
                    "perturb_permittivity: realization length differs from grid");
    return DebyeRow(grid, omega).apply(realization.values);
}

/// Cov(deps(w), deps(w')) = sum_u sum_u' w_u w_u' K(u,u') / ((1 + j w e^u)(1 - j w' e^u')).
inline cdouble permittivity_covariance(const KernelMatrix& kernel, const LogTauGrid& grid, double omega,
                                       double omega_p) {
    require_frequency(omega, "permittivity_covariance");
    require_frequency(omega_p, "permittivity_covariance");
    require_same_grid(kernel.grid, grid, "permittivity_covariance");
    const DebyeRow a(grid, omega);
    const DebyeRow b(grid, omega_p);
    return a.weights_times_kernel.transpose() * kernel.entries.cast<cdouble>() * b.weights_times_kernel.conjugate();
}

/// Full cross-frequency covariance matrix D K D^H over `omegas`.
inline ComplexMatrix permittivity_covariance_matrix(const KernelMatrix& kernel, std::span<const double> omegas) {
    const ComplexMatrix d = debye_matrix(kernel.grid, omegas);
    return d * kernel.entries.cast<cdouble>() * d.adjoint();
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_DIELECTRIC_HPP
