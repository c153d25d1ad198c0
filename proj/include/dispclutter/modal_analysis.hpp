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

// KL modes pushed through the steering operator and their scene-level
// components; truncated reconstructions and closure errors.

#ifndef DISPCLUTTER_MODAL_ANALYSIS_HPP
#define DISPCLUTTER_MODAL_ANALYSIS_HPP

#include <vector>

#include "dispclutter/core.hpp"
#include "dispclutter/covariance.hpp"
#include "dispclutter/propagation.hpp"
#include "dispclutter/relaxation_field.hpp"

namespace dispclutter {

/// h_q = sum_u entries(:,u) phi_q(u). The steering kernel already carries the
/// quadrature weight, so phi_q enters unweighted.
inline ComplexVector propagate_mode(const SteeringKernel& kernel, const RealVector& phi_q) {
    detail::require(phi_q.size() == kernel.entries.cols(), ErrorKind::GridMismatch,
                    "propagate_mode: eigenfunction length differs from grid");
    return kernel.entries * phi_q.cast<cdouble>();
}

/// All propagated modes of one patch, as columns (M x Q).
inline ComplexMatrix propagate_modes(const SteeringKernel& kernel, const KLBasis& kl) {
    require_same_grid(kernel.grid, kl.grid, "propagate_modes");
    return kernel.entries * kl.eigenfunctions.cast<cdouble>();
}

/// S_q = sum_p weight_p sigma_beta^2_p h_q(p) h_q(p)^H.
inline ComplexMatrix modal_component(const SceneGrid& scene, const std::vector<ComplexVector>& per_patch_hq) {
    detail::require(per_patch_hq.size() == scene.size() && !per_patch_hq.empty(), ErrorKind::DimensionMismatch,
                    "modal_component: one propagated mode per patch required");
    const Eigen::Index m = per_patch_hq.front().size();
    ComplexMatrix s = ComplexMatrix::Zero(m, m);
    for (std::size_t p = 0; p < scene.size(); ++p) {
        const double c = scene.integration_weights[p] * scene.patches[p].sigma_beta_sq;
        if (c != 0.0) s.noalias() += c * per_patch_hq[p] * per_patch_hq[p].adjoint();
    }
    return s;
}

struct ModalSet {
    int order = 0;                                // Q
    std::vector<ComplexMatrix> propagated_modes;  // per patch: M x Q, column q = h_q
    std::vector<ComplexMatrix> components;        // S_q, q < Q
    RealVector lambdas;                           // first Q KL eigenvalues
};

inline ModalSet build_modal_set(const SceneGrid& scene, const std::vector<SteeringKernel>& kernels, const KLBasis& kl,
                                int order = -1) {
    detail::require(kernels.size() == scene.size(), ErrorKind::DimensionMismatch,
                    "build_modal_set: one steering kernel per patch required");
    const int q_all = static_cast<int>(kl.modes());
    if (order < 0) order = q_all;
    detail::require(order >= 1 && order <= q_all, ErrorKind::InvalidTruncation,
                    "build_modal_set: order must be in [1, " + std::to_string(q_all) + "]");
    ModalSet set;
    set.order = order;
    set.lambdas = kl.eigenvalues.head(order);
    for (const auto& k : kernels) set.propagated_modes.push_back(propagate_modes(k, kl).leftCols(order));
    std::vector<ComplexVector> hq(scene.size());
    for (int q = 0; q < order; ++q) {
        for (std::size_t p = 0; p < scene.size(); ++p) hq[p] = set.propagated_modes[p].col(q);
        set.components.push_back(modal_component(scene, hq));
    }
    return set;
}

/// sum_{q<Q} lambda_q h_q h_q^H for one patch.
inline ComplexMatrix local_modal_reconstruction(const ModalSet& set, std::size_t patch, int q) {
    detail::require(q >= 1 && q <= set.order, ErrorKind::InvalidTruncation, "local_modal_reconstruction: Q out of range");
    const ComplexMatrix& h = set.propagated_modes.at(patch);
    const auto hq = h.leftCols(q);
    return hq * set.lambdas.head(q).cast<cdouble>().asDiagonal() * hq.adjoint();
}

struct TruncationResult {
    int q;
    CovarianceMatrix rmed_q;
    double global_closure;              // ||Rmed - Rmed^(Q)||_F / ||Rmed||_F
    std::vector<double> local_closure;  // per requested patch, against R_a
};

/// Partial sum sum_{q<Q} lambda_q S_q with global and local closure errors.
inline TruncationResult truncated_reconstruction(const ModalSet& set, int q, const CovarianceMatrix& rmed,
                                                 const std::vector<std::size_t>& local_patches = {},
                                                 const std::vector<CovarianceMatrix>& local_reference = {}) {
    detail::require(q >= 1 && q <= set.order, ErrorKind::InvalidTruncation,
                    "truncated_reconstruction: Q must be in [1, " + std::to_string(set.order) + "]");
    detail::require(local_patches.size() == local_reference.size(), ErrorKind::DimensionMismatch,
                    "truncated_reconstruction: one reference R_a per local patch required");
    ComplexMatrix acc = ComplexMatrix::Zero(rmed.dim(), rmed.dim());
    for (int k = 0; k < q; ++k) acc += set.lambdas[k] * set.components[static_cast<std::size_t>(k)];
    TruncationResult out{q, CovarianceMatrix(acc, "Rmed_Q"), guarded_relative_error(acc, rmed.entries()), {}};
    for (std::size_t i = 0; i < local_patches.size(); ++i)
        out.local_closure.push_back(guarded_relative_error(local_modal_reconstruction(set, local_patches[i], q),
                                                           local_reference[i].entries()));
    return out;
}

/// Cumulative KL energy fractions sum_{q<=Q} lambda_q / sum lambda.
inline RealVector kl_energy_curve(const KLBasis& kl) {
    const double total = kl.eigenvalues.sum();
    detail::require(total > 0.0, ErrorKind::UndefinedMetric, "kl_energy_curve: zero spectrum");
    RealVector out(kl.modes());
    double cum = 0.0;
    for (Eigen::Index q = 0; q < kl.modes(); ++q) {
        cum += kl.eigenvalues[q];
        out[q] = cum / total;
    }
    out[kl.modes() - 1] = 1.0;
    return out;
}

/// Number of leading modes needed to reach `fraction` of the KL energy.
inline int modes_for_energy(const RealVector& curve, double fraction) {
    for (Eigen::Index q = 0; q < curve.size(); ++q)
        if (curve[q] >= fraction) return static_cast<int>(q + 1);
    return static_cast<int>(curve.size());
}

/// 1, 2, 4, ... below `full`, then `full`.
inline std::vector<int> truncation_sweep(int full) {
    std::vector<int> qs;
    for (int q = 1; q < full; q *= 2) qs.push_back(q);
    qs.push_back(full);
    return qs;
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_MODAL_ANALYSIS_HPP
