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

// Spectral structure of clutter covariances: effective rank, alignment,
// energy-based subspace dimension, its lower bound, and target/clutter
// subspace overlap.

#ifndef DISPCLUTTER_SPECTRAL_METRICS_HPP
#define DISPCLUTTER_SPECTRAL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dispclutter/core.hpp"
#include "dispclutter/covariance.hpp"

namespace dispclutter {

/// Eigenpairs in non-increasing order. Eigenvalues are clamped at 0 (the
/// PSD check happens when the CovarianceMatrix is built).
struct EigenSpectrum {
    RealVector eigenvalues;
    ComplexMatrix eigenvectors;  // column m = u_m

    Eigen::Index size() const noexcept { return eigenvalues.size(); }
    double total() const { return eigenvalues.sum(); }
};

inline EigenSpectrum eigen_spectrum(const ComplexMatrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitian);
    detail::require(solver.info() == Eigen::Success, ErrorKind::UndefinedMetric, "eigen_spectrum: solver failed");
    const Eigen::Index n = hermitian.rows();
    EigenSpectrum s{RealVector(n), ComplexMatrix(n, n)};
    // Eigen sorts ascending; reverse so ties keep a stable index order.
    for (Eigen::Index i = 0; i < n; ++i) {
        s.eigenvalues[i] = std::max(0.0, solver.eigenvalues()[n - 1 - i]);
        s.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return s;
}

inline EigenSpectrum eigen_spectrum(const CovarianceMatrix& c) { return eigen_spectrum(c.entries()); }

/// (tr R)^2 / ||R||_F^2.
inline double effective_rank(const ComplexMatrix& r) {
    const double fro2 = r.squaredNorm();
    detail::require(fro2 > 0.0, ErrorKind::UndefinedMetric, "effective_rank: zero matrix");
    const double tr = r.trace().real();
    return tr * tr / fro2;
}

inline double effective_rank(const CovarianceMatrix& c) { return effective_rank(c.entries()); }

/// 1 / sum p_m^2 with p_m = lambda_m / sum lambda.
inline double effective_rank(const EigenSpectrum& s) {
    const double total = s.total();
    detail::require(total > 0.0, ErrorKind::UndefinedMetric, "effective_rank: zero spectrum");
    return 1.0 / (s.eigenvalues / total).squaredNorm();
}

/// Frobenius inner product Re tr(A^H B).
inline double frobenius_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a.adjoint() * b).trace().real();
}

/// <R0, Rmed>_F / (||R0||_F ||Rmed||_F), in [0, 1] for PSD pairs.
inline double alignment_mu(const CovarianceMatrix& r0, const CovarianceMatrix& rmed) {
    const double n0 = r0.frobenius();
    const double nm = rmed.frobenius();
    detail::require(n0 > 0.0 && nm > 0.0, ErrorKind::UndefinedMetric, "alignment_mu: zero input");
    return frobenius_inner(r0.entries(), rmed.entries()) / (n0 * nm);
}

/// r_eff(R0 + Rmed) from the traces, norms and alignment of the two parts.
inline double effective_rank_from_alignment(double trace_r0, double trace_rmed, double fro_r0, double fro_rmed,
                                            double mu) {
    const double t = trace_r0 + trace_rmed;
    const double denom = fro_r0 * fro_r0 + fro_rmed * fro_rmed + 2.0 * mu * fro_r0 * fro_rmed;
    detail::require(denom > 0.0, ErrorKind::UndefinedMetric, "effective_rank_from_alignment: zero denominator");
    return t * t / denom;
}

/// (sum_q l_q tr S_q)^2 / sum_q sum_p l_q l_p <S_q, S_p>_F.
inline double kl_effective_rank_med(const RealVector& lambdas, const std::vector<ComplexMatrix>& components) {
    detail::require(!components.empty(), ErrorKind::UndefinedMetric, "kl_effective_rank_med: no modes");
    detail::require(static_cast<Eigen::Index>(components.size()) <= lambdas.size(), ErrorKind::DimensionMismatch,
                    "kl_effective_rank_med: more components than eigenvalues");
    const std::size_t q_max = components.size();
    double num = 0.0;
    for (std::size_t q = 0; q < q_max; ++q) num += lambdas[static_cast<Eigen::Index>(q)] * components[q].trace().real();
    double den = 0.0;
    for (std::size_t q = 0; q < q_max; ++q) {
        const double lq = lambdas[static_cast<Eigen::Index>(q)];
        if (lq == 0.0) continue;
        den += lq * lq * components[q].squaredNorm();
        for (std::size_t p = q + 1; p < q_max; ++p)
            den += 2.0 * lq * lambdas[static_cast<Eigen::Index>(p)] * frobenius_inner(components[q], components[p]);
    }
    detail::require(den > 0.0, ErrorKind::UndefinedMetric, "kl_effective_rank_med: zero denominator");
    return num * num / den;
}

/// Smallest p with (sum_{m<=p} lambda_m) / (sum lambda) >= rho.
inline int effective_subspace_dim(const EigenSpectrum& s, double rho) {
    detail::require(rho > 0.0 && rho < 1.0, ErrorKind::InvalidArgument, "effective_subspace_dim: rho must be in (0,1)");
    const double total = s.total();
    detail::require(total > 0.0 && std::isfinite(total), ErrorKind::UndefinedMetric,
                    "effective_subspace_dim: degenerate spectrum");
    double cum = 0.0;
    for (Eigen::Index p = 0; p < s.size(); ++p) {
        cum += s.eigenvalues[p];
        if (cum / total >= rho) return static_cast<int>(p + 1);
    }
    return static_cast<int>(s.size());
}

struct BoundCheck {
    bool holds;
    int p_rho;
    double r_eff;
    double slack;  // p_rho - rho^2 r_eff
};

/// p_rho >= rho^2 r_eff.
inline BoundCheck bound_check(const EigenSpectrum& s, double rho) {
    const int p = effective_subspace_dim(s, rho);
    const double r = effective_rank(s);
    const double slack = static_cast<double>(p) - rho * rho * r;
    // Cauchy-Schwarz is tight when the leading p fractions are equal; allow
    // round-off at that equality.
    return BoundCheck{slack >= -1e-12 * std::max(1.0, r), p, r, slack};
}

struct SeparabilityReport {
    int p;
    double gamma;  // ||P a_t||^2 / ||a_t||^2
    double eta;    // ||(I - P) a_t||^2 / ||a_t||^2
};

/// Overlap of a target steering vector with the leading-p clutter subspace.
inline SeparabilityReport separability(const EigenSpectrum& s, int p, const ComplexVector& target) {
    detail::require(p >= 1 && p <= s.size(), ErrorKind::InvalidArgument, "separability: p out of range");
    detail::require(target.size() == s.size(), ErrorKind::DimensionMismatch, "separability: target length != M");
    const double norm2 = target.squaredNorm();
    detail::require(norm2 > 0.0, ErrorKind::UndefinedMetric, "separability: zero target");
    const auto basis = s.eigenvectors.leftCols(p);
    const ComplexVector coeffs = basis.adjoint() * target;
    const ComplexVector residual = target - basis * coeffs;
    const double gamma = std::clamp(coeffs.squaredNorm() / norm2, 0.0, 1.0);
    const double eta = std::clamp(residual.squaredNorm() / norm2, 0.0, 1.0);
    return SeparabilityReport{p, gamma, eta};
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_SPECTRAL_METRICS_HPP
