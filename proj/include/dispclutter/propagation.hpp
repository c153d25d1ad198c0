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

// Permittivity -> complex wavenumber -> FDA-MIMO steering vector, with the
// exact and first-order maps from a relaxation-field realization to the
// steering perturbation.

#ifndef DISPCLUTTER_PROPAGATION_HPP
#define DISPCLUTTER_PROPAGATION_HPP

#include <cmath>
#include <vector>

#include "dispclutter/core.hpp"
#include "dispclutter/dielectric.hpp"
#include "dispclutter/relaxation_field.hpp"

namespace dispclutter {

/// f_m = f0 + n_m * delta_f.
struct FrequencyPlan {
    double f0 = 1e9;
    double delta_f = 2e6;
    std::vector<double> coding;

    static FrequencyPlan linear(double f0, double delta_f, int channels) {
        FrequencyPlan p{f0, delta_f, {}};
        for (int m = 0; m < channels; ++m) p.coding.push_back(static_cast<double>(m));
        return p;
    }

    Eigen::Index channels() const noexcept { return static_cast<Eigen::Index>(coding.size()); }
    double frequency(Eigen::Index m) const { return f0 + coding.at(static_cast<std::size_t>(m)) * delta_f; }
    double omega(Eigen::Index m) const { return 2.0 * kPi * frequency(m); }

    std::vector<double> omegas() const {
        std::vector<double> out;
        for (Eigen::Index m = 0; m < channels(); ++m) out.push_back(omega(m));
        return out;
    }

    void validate() const {
        detail::require(!coding.empty(), ErrorKind::InvalidArgument, "FrequencyPlan: no channels");
        for (Eigen::Index m = 0; m < channels(); ++m)
            detail::require(std::isfinite(frequency(m)) && frequency(m) > 0.0, ErrorKind::InvalidFrequency,
                            "FrequencyPlan: channel frequency must be > 0");
    }
};

/// Collocated transmit-receive channel positions along the array axis [m].
struct ArrayGeometry {
    std::vector<double> positions;

    /// `channels` uniformly spaced positions centred on the origin.
    static ArrayGeometry uniform(int channels, double spacing) {
        ArrayGeometry g;
        const double c = 0.5 * (channels - 1);
        for (int m = 0; m < channels; ++m) g.positions.push_back((m - c) * spacing);
        return g;
    }

    Eigen::Index channels() const noexcept { return static_cast<Eigen::Index>(positions.size()); }

    void validate() const {
        detail::require(!positions.empty(), ErrorKind::InvalidArgument, "ArrayGeometry: no channels");
        for (std::size_t i = 0; i < positions.size(); ++i) {
            detail::require(std::isfinite(positions[i]), ErrorKind::InvalidArgument, "ArrayGeometry: non-finite position");
            if (i > 0)
                detail::require(positions[i] > positions[i - 1], ErrorKind::InvalidArgument,
                                "ArrayGeometry: positions must be strictly increasing");
        }
    }
};

/// One scene cell. The patch sits at Cartesian (r sin(theta), r cos(theta)),
/// depth measured along +y from the array line.
struct ScenePatch {
    double theta = 0.0;
    double r = 1.0;
    double sigma_beta_sq = 1.0;
    RealVector gains;

    void validate(Eigen::Index channels) const {
        detail::require(r > 0.0, ErrorKind::InvalidArgument, "ScenePatch: r must be > 0");
        detail::require(sigma_beta_sq >= 0.0, ErrorKind::InvalidArgument, "ScenePatch: sigma_beta_sq must be >= 0");
        detail::require(gains.size() == channels, ErrorKind::DimensionMismatch, "ScenePatch: gains length != M");
        detail::require((gains.array() > 0.0).all(), ErrorKind::InvalidArgument, "ScenePatch: gains must be > 0");
    }
};

/// Two-way straight-ray length between channel m at (d_m, 0) and the patch.
inline double path_length(const ArrayGeometry& geometry, const ScenePatch& patch, Eigen::Index m) {
    detail::require(m >= 0 && m < geometry.channels(), ErrorKind::InvalidChannel,
                    "path_length: channel index " + std::to_string(m) + " out of range");
    const double dx = patch.r * std::sin(patch.theta) - geometry.positions[static_cast<std::size_t>(m)];
    const double dy = patch.r * std::cos(patch.theta);
    return 2.0 * std::hypot(dx, dy);
}

inline RealVector path_lengths(const ArrayGeometry& geometry, const ScenePatch& patch) {
    RealVector l(geometry.channels());
    for (Eigen::Index m = 0; m < l.size(); ++m) l[m] = path_length(geometry, patch, m);
    return l;
}

/// k_c = (w / c0) * sqrt(eps_r), principal branch (Re >= 0; Im <= 0 for passive media).
inline cdouble complex_wavenumber(cdouble eps_rel, double omega) {
    require_frequency(omega, "complex_wavenumber");
    detail::require(eps_rel != cdouble(0.0), ErrorKind::DegenerateMedium, "complex_wavenumber: zero permittivity");
    return (omega / kSpeedOfLight) * std::sqrt(eps_rel);
}

/// d k_c / d eps_r = w / (2 c0 sqrt(eps_r)).
inline cdouble wavenumber_sensitivity(cdouble eps_rel_nominal, double omega) {
    require_frequency(omega, "wavenumber_sensitivity");
    detail::require(eps_rel_nominal != cdouble(0.0), ErrorKind::DegenerateMedium,
                    "wavenumber_sensitivity: zero permittivity");
    return omega / (2.0 * kSpeedOfLight * std::sqrt(eps_rel_nominal));
}

/// |k(eps + d) - k(eps) - k'(eps) d| / |k(eps + d) - k(eps)|, 0/0 := 0.
inline double linearization_error_wavenumber(cdouble eps_rel_nominal, cdouble delta_eps, double omega) {
    const cdouble kbar = complex_wavenumber(eps_rel_nominal, omega);
    const cdouble dk = complex_wavenumber(eps_rel_nominal + delta_eps, omega) - kbar;
    const cdouble residual = dk - wavenumber_sensitivity(eps_rel_nominal, omega) * delta_eps;
    if (std::abs(dk) == 0.0) return std::abs(residual) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(residual) / std::abs(dk);
}

/// The principal root is the continuation of the nominal root when it lies
/// closer to k_bar than its negative and keeps Re >= 0.
inline bool same_branch(cdouble k, cdouble kbar) {
    return k.real() >= 0.0 && std::abs(k - kbar) <= std::abs(k + kbar);
}

/// Nominal medium: spectrum + the grid it lives on.
struct NominalMedium {
    NominalSpectrum spectrum;
    LogTauGrid grid;

    cdouble permittivity(double omega) const { return nominal_permittivity(spectrum, grid, omega); }
};

/// Per-channel quantities shared by every patch: Debye rows, nominal
/// permittivity, wavenumber and sensitivity at each channel frequency.
struct ChannelMedium {
    std::vector<double> omegas;
    ComplexMatrix debye;        // M x N
    ComplexVector eps_nominal;  // M
    ComplexVector k_nominal;    // M
    ComplexVector sensitivity;  // M

    ChannelMedium(const FrequencyPlan& plan, const NominalMedium& medium) : omegas(plan.omegas()) {
        plan.validate();
        medium.spectrum.validate(medium.grid);
        const auto m = static_cast<Eigen::Index>(omegas.size());
        debye = debye_matrix(medium.grid, omegas);
        eps_nominal.resize(m);
        k_nominal.resize(m);
        sensitivity.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            eps_nominal[i] = medium.permittivity(omegas[static_cast<std::size_t>(i)]);
            k_nominal[i] = complex_wavenumber(eps_nominal[i], omegas[static_cast<std::size_t>(i)]);
            sensitivity[i] = wavenumber_sensitivity(eps_nominal[i], omegas[static_cast<std::size_t>(i)]);
        }
    }

    Eigen::Index channels() const noexcept { return eps_nominal.size(); }
};

/// Channel-domain image of one field realization.
struct ChannelPerturbation {
    ComplexVector delta_eps;       // deps_r(w_m)
    ComplexVector delta_k_exact;   // k(eps_bar + deps) - k_bar
    ComplexVector delta_k_linear;  // sensitivity * deps
    int branch_switches = 0;
};

inline ChannelPerturbation channel_perturbation(const ChannelMedium& ch, const FieldRealization& realization) {
    detail::require(realization.values.size() == ch.debye.cols(), ErrorKind::GridMismatch,
                    "channel_perturbation: realization length differs from grid");
    ChannelPerturbation out;
    out.delta_eps = ch.debye * realization.values.cast<cdouble>();
    out.delta_k_exact.resize(ch.channels());
    out.delta_k_linear = ch.sensitivity.cwiseProduct(out.delta_eps);
    double prev_im_sign = 0.0;
    for (Eigen::Index m = 0; m < ch.channels(); ++m) {
        const cdouble k = complex_wavenumber(ch.eps_nominal[m] + out.delta_eps[m], ch.omegas[static_cast<std::size_t>(m)]);
        out.delta_k_exact[m] = k - ch.k_nominal[m];
        const double s = (k.imag() > 0.0) - (k.imag() < 0.0);
        const bool flipped = s != 0.0 && prev_im_sign != 0.0 && s != prev_im_sign;
        if (!same_branch(k, ch.k_nominal[m]) || flipped) ++out.branch_switches;
        if (s != 0.0) prev_im_sign = s;
    }
    return out;
}

/// a0_m = G_m exp(-j k_bar(w_m) L_m).
inline ComplexVector nominal_steering(const ArrayGeometry& geometry, const ChannelMedium& ch, const ScenePatch& patch) {
    detail::require(geometry.channels() == ch.channels(), ErrorKind::DimensionMismatch,
                    "nominal_steering: geometry and frequency plan disagree on M");
    patch.validate(geometry.channels());
    ComplexVector a0(ch.channels());
    for (Eigen::Index m = 0; m < a0.size(); ++m)
        a0[m] = patch.gains[m] * std::exp(-kJ * ch.k_nominal[m] * path_length(geometry, patch, m));
    return a0;
}

inline ComplexVector nominal_steering(const ArrayGeometry& geometry, const FrequencyPlan& plan,
                                      const ScenePatch& patch, const NominalMedium& medium) {
    return nominal_steering(geometry, ChannelMedium(plan, medium), patch);
}

/// exp(z) - 1 without cancellation for small |z|.
inline cdouble complex_expm1(cdouble z) {
    const double half_sin = std::sin(0.5 * z.imag());
    return {std::expm1(z.real()) * std::cos(z.imag()) - 2.0 * half_sin * half_sin,
            std::exp(z.real()) * std::sin(z.imag())};
}

/// Exact steering perturbation a0 (exp(-j dk L) - 1) from per-channel wavenumber shifts.
inline ComplexVector steering_perturbation_from_wavenumber(const ComplexVector& a0, const RealVector& lengths,
                                                           const ComplexVector& delta_k) {
    ComplexVector out(a0.size());
    for (Eigen::Index m = 0; m < a0.size(); ++m) out[m] = a0[m] * complex_expm1(-kJ * delta_k[m] * lengths[m]);
    return out;
}

/// Linear operator from the field to the first-order steering perturbation.
/// Quadrature weights are embedded in `entries`:
/// entries(m,u) = w_u * (-j) L_m a0_m * w_m / (2 c0 n_bar(w_m)) / (1 + j w_m e^u).
struct SteeringKernel {
    ComplexMatrix entries;  // M x N
    ComplexVector nominal;  // a0
    RealVector lengths;     // L_m
    ScenePatch patch;
    LogTauGrid grid;
};

inline SteeringKernel steering_kernel(const ArrayGeometry& geometry, const ChannelMedium& ch,
                                      const ScenePatch& patch, const LogTauGrid& grid) {
    detail::require(grid.size() == ch.debye.cols(), ErrorKind::GridMismatch, "steering_kernel: grid mismatch");
    ComplexVector a0 = nominal_steering(geometry, ch, patch);
    RealVector lengths = path_lengths(geometry, patch);
    ComplexVector chain(ch.channels());
    for (Eigen::Index m = 0; m < chain.size(); ++m) chain[m] = -kJ * lengths[m] * a0[m] * ch.sensitivity[m];
    ComplexMatrix entries = chain.asDiagonal() * ch.debye;
    return SteeringKernel{std::move(entries), std::move(a0), std::move(lengths), patch, grid};
}

inline SteeringKernel steering_kernel(const ArrayGeometry& geometry, const FrequencyPlan& plan,
                                      const ScenePatch& patch, const NominalMedium& medium) {
    return steering_kernel(geometry, ChannelMedium(plan, medium), patch, medium.grid);
}

struct ExactSteeringPerturbation {
    ComplexVector delta;
    int branch_switches = 0;
};

inline ExactSteeringPerturbation perturb_steering_exact(const ArrayGeometry& geometry, const FrequencyPlan& plan,
                                                        const ScenePatch& patch, const FieldRealization& realization,
                                                        const NominalMedium& medium) {
    const ChannelMedium ch(plan, medium);
    const ChannelPerturbation cp = channel_perturbation(ch, realization);
    const ComplexVector a0 = nominal_steering(geometry, ch, patch);
    return {steering_perturbation_from_wavenumber(a0, path_lengths(geometry, patch), cp.delta_k_exact),
            cp.branch_switches};
}

inline ComplexVector perturb_steering_first_order(const SteeringKernel& kernel, const FieldRealization& realization) {
    detail::require(realization.values.size() == kernel.entries.cols(), ErrorKind::GridMismatch,
                    "perturb_steering_first_order: realization length differs from grid");
    return kernel.entries * realization.values.cast<cdouble>();
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_PROPAGATION_HPP
