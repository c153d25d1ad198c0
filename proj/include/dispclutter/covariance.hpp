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

#ifndef DISPCLUTTER_COVARIANCE_HPP
#define DISPCLUTTER_COVARIANCE_HPP

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dispclutter/core.hpp"
#include "dispclutter/propagation.hpp"
#include "dispclutter/relaxation_field.hpp"

namespace dispclutter {

/// Hermitian M x M matrix with its PSD diagnostics.
///
/// Construction symmetrizes the input to (A + A^H)/2 and records the
/// pre-symmetrization residual max|A - A^H| so that the eigen-diagnostics are
/// well posed while the raw asymmetry stays observable.
class CovarianceMatrix {
public:
    CovarianceMatrix() = default;

    CovarianceMatrix(const ComplexMatrix& raw, std::string label) : label_(std::move(label)) {
        detail::require(raw.rows() == raw.cols(), ErrorKind::DimensionMismatch, "CovarianceMatrix: not square");
        hermitian_residual_ = raw.rows() == 0 ? 0.0 : (raw - raw.adjoint()).cwiseAbs().maxCoeff();
        entries_ = 0.5 * (raw + raw.adjoint());
        max_abs_entry_ = entries_.size() == 0 ? 0.0 : entries_.cwiseAbs().maxCoeff();
        if (entries_.size() > 0) {
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(entries_, Eigen::EigenvaluesOnly);
            min_eigenvalue_ = solver.eigenvalues()[0];
            max_eigenvalue_ = solver.eigenvalues()[entries_.rows() - 1];
        }
    }

    const ComplexMatrix& entries() const noexcept { return entries_; }
    const std::string& label() const noexcept { return label_; }
    Eigen::Index dim() const noexcept { return entries_.rows(); }

    double hermitian_residual() const noexcept { return hermitian_residual_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }
    double max_eigenvalue() const noexcept { return max_eigenvalue_; }

    /// Residual relative to the largest entry magnitude (0 for a zero matrix).
    double scaled_hermitian_residual() const noexcept {
        return max_abs_entry_ > 0.0 ? hermitian_residual_ / max_abs_entry_ : 0.0;
    }

    /// min eigenvalue / max eigenvalue (0 for a zero matrix).
    double scaled_min_eigenvalue() const noexcept {
        return max_eigenvalue_ > 0.0 ? min_eigenvalue_ / max_eigenvalue_ : 0.0;
    }

    bool hermitian_ok(double tol = 1e-12) const noexcept { return scaled_hermitian_residual() <= tol; }
    bool psd_ok(double tol = 1e-10) const noexcept { return scaled_min_eigenvalue() >= -tol; }

    const CovarianceMatrix& require_psd() const {
        detail::require(hermitian_ok(), ErrorKind::NotPositiveSemidefinite,
                        label_ + ": Hermitian residual " + std::to_string(scaled_hermitian_residual()));
        detail::require(psd_ok(), ErrorKind::NotPositiveSemidefinite,
                        label_ + ": scaled min eigenvalue " + std::to_string(scaled_min_eigenvalue()));
        return *this;
    }

    double trace() const { return entries_.trace().real(); }
    double frobenius() const { return entries_.norm(); }

private:
    ComplexMatrix entries_;
    std::string label_;
    double hermitian_residual_ = 0.0;
    double max_abs_entry_ = 0.0;
    double min_eigenvalue_ = 0.0;
    double max_eigenvalue_ = 0.0;
};

inline double relative_error(const CovarianceMatrix& estimate, const CovarianceMatrix& truth) {
    return relative_error(estimate.entries(), truth.entries());
}

/// Discretized scene: patches with positive integration weights (area elements).
struct SceneGrid {
    std::vector<ScenePatch> patches;
    std::vector<double> integration_weights;

    std::size_t size() const noexcept { return patches.size(); }

    void validate(Eigen::Index channels) const {
        detail::require(!patches.empty(), ErrorKind::InvalidArgument, "SceneGrid: no patches");
        detail::require(patches.size() == integration_weights.size(), ErrorKind::DimensionMismatch,
                        "SceneGrid: one weight per patch required");
        for (std::size_t i = 0; i < patches.size(); ++i) {
            patches[i].validate(channels);
            detail::require(integration_weights[i] > 0.0, ErrorKind::InvalidArgument, "SceneGrid: weights must be > 0");
        }
    }

    /// n_theta x n_r polar grid with inclusive end points; weight = d_theta * d_r.
    /// Patch index = i_theta * n_r + i_r.
    static SceneGrid polar(double theta_lo, double theta_hi, int n_theta, double r_lo, double r_hi, int n_r,
                           Eigen::Index channels, double sigma_beta_sq = 1.0) {
        detail::require(n_theta >= 1 && n_r >= 1, ErrorKind::InvalidArgument, "SceneGrid::polar: empty grid");
        const double dth = n_theta > 1 ? (theta_hi - theta_lo) / (n_theta - 1) : 1.0;
        const double dr = n_r > 1 ? (r_hi - r_lo) / (n_r - 1) : 1.0;
        SceneGrid g;
        for (int i = 0; i < n_theta; ++i)
            for (int k = 0; k < n_r; ++k) {
                const double th = n_theta > 1 ? theta_lo + i * dth : 0.5 * (theta_lo + theta_hi);
                const double r = n_r > 1 ? r_lo + k * dr : 0.5 * (r_lo + r_hi);
                g.patches.push_back(ScenePatch{th, r, sigma_beta_sq, RealVector::Ones(channels)});
                g.integration_weights.push_back(dth * dr);
            }
        g.validate(channels);
        return g;
    }

    /// n_x x n_y Cartesian grid (x along the array, y = depth), converted to
    /// (theta, r); weight = dx * dy. Patch index = i_x * n_y + i_y.
    static SceneGrid cartesian(double x_lo, double x_hi, int n_x, double y_lo, double y_hi, int n_y,
                               Eigen::Index channels, double sigma_beta_sq = 1.0) {
        detail::require(n_x >= 1 && n_y >= 1, ErrorKind::InvalidArgument, "SceneGrid::cartesian: empty grid");
        detail::require(y_lo > 0.0, ErrorKind::InvalidArgument, "SceneGrid::cartesian: depth must be > 0");
        const double dx = n_x > 1 ? (x_hi - x_lo) / (n_x - 1) : 1.0;
        const double dy = n_y > 1 ? (y_hi - y_lo) / (n_y - 1) : 1.0;
        SceneGrid g;
        for (int i = 0; i < n_x; ++i)
            for (int k = 0; k < n_y; ++k) {
                const double x = n_x > 1 ? x_lo + i * dx : 0.5 * (x_lo + x_hi);
                const double y = n_y > 1 ? y_lo + k * dy : 0.5 * (y_lo + y_hi);
                g.patches.push_back(
                    ScenePatch{std::atan2(x, y), std::hypot(x, y), sigma_beta_sq, RealVector::Ones(channels)});
                g.integration_weights.push_back(dx * dy);
            }
        g.validate(channels);
        return g;
    }
};

/// R_a = E K E^H with E the steering kernel (weights embedded).
inline CovarianceMatrix local_steering_covariance(const SteeringKernel& kernel, const KernelMatrix& field_kernel) {
    require_same_grid(kernel.grid, field_kernel.grid, "local_steering_covariance");
    const ComplexMatrix ek = kernel.entries * field_kernel.entries.cast<cdouble>();
    CovarianceMatrix ra(ek * kernel.entries.adjoint(), "R_a");
    ra.require_psd();
    return ra;
}

/// R_0 = sum_p weight_p sigma_beta^2_p a0_p a0_p^H.
inline CovarianceMatrix nominal_covariance(const SceneGrid& scene, const std::vector<ComplexVector>& nominal_steering) {
    detail::require(!scene.patches.empty(), ErrorKind::InvalidArgument, "nominal_covariance: empty scene");
    detail::require(nominal_steering.size() == scene.size(), ErrorKind::DimensionMismatch,
                    "nominal_covariance: one steering vector per patch required");
    const Eigen::Index m = nominal_steering.front().size();
    ComplexMatrix acc = ComplexMatrix::Zero(m, m);
    for (std::size_t p = 0; p < scene.size(); ++p) {
        const double c = scene.integration_weights[p] * scene.patches[p].sigma_beta_sq;
        if (c == 0.0) continue;
        acc.noalias() += c * nominal_steering[p] * nominal_steering[p].adjoint();
    }
    return CovarianceMatrix(acc, "R0");
}

/// R_med = sum_p weight_p sigma_beta^2_p R_a(p).
inline CovarianceMatrix medium_covariance(const SceneGrid& scene, const std::vector<CovarianceMatrix>& local) {
    detail::require(local.size() == scene.size() && !local.empty(), ErrorKind::DimensionMismatch,
                    "medium_covariance: one R_a per patch required");
    const Eigen::Index m = local.front().dim();
    ComplexMatrix acc = ComplexMatrix::Zero(m, m);
    for (std::size_t p = 0; p < scene.size(); ++p) {
        detail::require(local[p].dim() == m, ErrorKind::DimensionMismatch, "medium_covariance: size mismatch");
        acc += scene.integration_weights[p] * scene.patches[p].sigma_beta_sq * local[p].entries();
    }
    return CovarianceMatrix(acc, "Rmed");
}

inline CovarianceMatrix total_covariance(const CovarianceMatrix& r0, const CovarianceMatrix& rmed) {
    detail::require(r0.dim() == rmed.dim(), ErrorKind::DimensionMismatch, "total_covariance: dimension mismatch");
    return CovarianceMatrix(r0.entries() + rmed.entries(), "Rc");
}

/// (1/n) sum x x^H. The mean is not subtracted: the perturbations are zero-mean
/// by construction of the field.
inline CovarianceMatrix sample_covariance(const std::vector<ComplexVector>& samples, std::string label = "sample") {
    detail::require(samples.size() >= 2, ErrorKind::InsufficientSamples,
                    "sample_covariance: need at least 2 samples, got " + std::to_string(samples.size()));
    const Eigen::Index m = samples.front().size();
    ComplexMatrix acc = ComplexMatrix::Zero(m, m);
    for (const auto& x : samples) {
        detail::require(x.size() == m, ErrorKind::DimensionMismatch, "sample_covariance: ragged samples");
        acc.noalias() += x * x.adjoint();
    }
    return CovarianceMatrix(acc / static_cast<double>(samples.size()), std::move(label));
}

/// Streaming form of sample_covariance: accumulate, then mean().
class SecondMomentAccumulator {
public:
    explicit SecondMomentAccumulator(Eigen::Index dim) : acc_(ComplexMatrix::Zero(dim, dim)) {}

    void add(const ComplexVector& x) {
        acc_.selfadjointView<Eigen::Lower>().rankUpdate(x);
        ++count_;
    }

    /// Adds another accumulator's samples (blocks merged in a fixed order
    /// give thread-count-independent results).
    void merge(const SecondMomentAccumulator& other) {
        detail::require(other.acc_.rows() == acc_.rows(), ErrorKind::DimensionMismatch,
                        "SecondMomentAccumulator::merge: dimension mismatch");
        acc_ += other.acc_;  // only the lower triangles are populated
        count_ += other.count_;
    }

    std::size_t count() const noexcept { return count_; }

    ComplexMatrix mean() const {
        detail::require(count_ >= 2, ErrorKind::InsufficientSamples,
                        "SecondMomentAccumulator: need at least 2 samples, got " + std::to_string(count_));
        ComplexMatrix full = acc_.selfadjointView<Eigen::Lower>();
        return full / static_cast<double>(count_);
    }

private:
    ComplexMatrix acc_;
    std::size_t count_ = 0;
};

enum class PerturbationMode { Exact, FirstOrder };

/// How the Monte Carlo total clutter covariance is assembled.
///   Decomposed: R_0 + sum_p c_p R_a^sample(p)
///   Direct:     sum_p c_p (1/n) sum_i a_i a_i^H with a_i = a0 + da_i, using the
///               zero-mean first-order perturbation as a control variate for the
///               a0 da^H cross terms.
/// c_p = weight_p * sigma_beta^2_p; beta is integrated analytically in both.
enum class ClutterEstimator { Decomposed, Direct };

/// Streaming per-patch Monte Carlo statistics of steering perturbations.
class ClutterMonteCarlo {
public:
    ClutterMonteCarlo(const SceneGrid& scene, std::vector<ComplexVector> nominal)
        : scene_(scene), nominal_(std::move(nominal)) {
        detail::require(nominal_.size() == scene_.size() && !nominal_.empty(), ErrorKind::DimensionMismatch,
                        "ClutterMonteCarlo: one nominal steering vector per patch required");
        const Eigen::Index m = nominal_.front().size();
        for (std::size_t p = 0; p < scene_.size(); ++p) {
            exact_.emplace_back(m);
            linear_.emplace_back(m);
            exact_sum_.push_back(ComplexVector::Zero(m));
            linear_sum_.push_back(ComplexVector::Zero(m));
        }
        r0_ = nominal_covariance(scene_, nominal_);
    }

    void add(std::size_t patch, const ComplexVector& exact_delta, const ComplexVector& first_order_delta) {
        exact_.at(patch).add(exact_delta);
        linear_.at(patch).add(first_order_delta);
        exact_sum_[patch] += exact_delta;
        linear_sum_[patch] += first_order_delta;
    }

    void merge(const ClutterMonteCarlo& other) {
        detail::require(other.exact_.size() == exact_.size(), ErrorKind::DimensionMismatch,
                        "ClutterMonteCarlo::merge: scene mismatch");
        for (std::size_t p = 0; p < exact_.size(); ++p) {
            exact_[p].merge(other.exact_[p]);
            linear_[p].merge(other.linear_[p]);
            exact_sum_[p] += other.exact_sum_[p];
            linear_sum_[p] += other.linear_sum_[p];
        }
    }

    std::size_t count() const noexcept { return exact_.front().count(); }
    const std::vector<ComplexVector>& nominal() const noexcept { return nominal_; }
    const CovarianceMatrix& r0() const noexcept { return r0_; }

    ComplexMatrix sample_ra(std::size_t patch, PerturbationMode mode) const {
        return mode == PerturbationMode::Exact ? exact_.at(patch).mean() : linear_.at(patch).mean();
    }

    CovarianceMatrix sample_local(std::size_t patch, PerturbationMode mode) const {
        return CovarianceMatrix(sample_ra(patch, mode), "R_a_mc");
    }

    CovarianceMatrix medium_covariance(PerturbationMode mode) const {
        ComplexMatrix acc = ComplexMatrix::Zero(r0_.dim(), r0_.dim());
        for (std::size_t p = 0; p < scene_.size(); ++p) acc += coefficient(p) * sample_ra(p, mode);
        return CovarianceMatrix(acc, "Rmed_mc");
    }

    CovarianceMatrix clutter_covariance(PerturbationMode mode, ClutterEstimator estimator) const {
        ComplexMatrix acc = r0_.entries();
        const double n = static_cast<double>(count());
        for (std::size_t p = 0; p < scene_.size(); ++p) {
            ComplexMatrix term = sample_ra(p, mode);
            if (estimator == ClutterEstimator::Direct) {
                const ComplexVector& mean = mode == PerturbationMode::Exact ? exact_sum_[p] : linear_sum_[p];
                const ComplexVector shift = (mean - linear_sum_[p]) / n;
                term += nominal_[p] * shift.adjoint() + shift * nominal_[p].adjoint();
            }
            acc += coefficient(p) * term;
        }
        return CovarianceMatrix(acc, "Rc_mc");
    }

private:
    double coefficient(std::size_t p) const {
        return scene_.integration_weights[p] * scene_.patches[p].sigma_beta_sq;
    }

    SceneGrid scene_;
    std::vector<ComplexVector> nominal_;
    std::vector<SecondMomentAccumulator> exact_;
    std::vector<SecondMomentAccumulator> linear_;
    std::vector<ComplexVector> exact_sum_;
    std::vector<ComplexVector> linear_sum_;
    CovarianceMatrix r0_;
};

/// Batch form: perturbations[p][i] is the steering perturbation of patch p in
/// realization i, for both the exact and first-order maps.
inline CovarianceMatrix mc_clutter_covariance(const SceneGrid& scene, const std::vector<ComplexVector>& nominal,
                                              const std::vector<std::vector<ComplexVector>>& exact,
                                              const std::vector<std::vector<ComplexVector>>& first_order,
                                              PerturbationMode mode,
                                              ClutterEstimator estimator = ClutterEstimator::Direct) {
    detail::require(exact.size() == scene.size() && first_order.size() == scene.size(), ErrorKind::DimensionMismatch,
                    "mc_clutter_covariance: perturbations must be given per patch");
    ClutterMonteCarlo mc(scene, nominal);
    for (std::size_t p = 0; p < scene.size(); ++p) {
        detail::require(exact[p].size() == first_order[p].size(), ErrorKind::DimensionMismatch,
                        "mc_clutter_covariance: exact/first-order realization counts differ");
        for (std::size_t i = 0; i < exact[p].size(); ++i) mc.add(p, exact[p][i], first_order[p][i]);
    }
    return mc.clutter_covariance(mode, estimator);
}

// CSV: line 1 "dimension,label", line 2 "<M>,<label>", then M rows of
// 2M values re(0,0),im(0,0),re(0,1),im(0,1),...

inline void write_covariance_csv(std::ostream& os, const CovarianceMatrix& c) {
    os << "dimension,label\n" << c.dim() << ',' << c.label() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < c.dim(); ++i) {
        for (Eigen::Index j = 0; j < c.dim(); ++j) {
            if (j > 0) os << ',';
            os << c.entries()(i, j).real() << ',' << c.entries()(i, j).imag();
        }
        os << '\n';
    }
}

inline CovarianceMatrix read_covariance_csv(std::istream& is) {
    std::string line;
    auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidArgument, "covariance CSV: " + why); };
    if (!std::getline(is, line) || line != "dimension,label") fail("missing header row");
    if (!std::getline(is, line)) fail("missing dimension row");
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("malformed dimension row");
    const long dim = std::stol(line.substr(0, comma));
    const std::string label = line.substr(comma + 1);
    if (dim < 0) fail("negative dimension");
    ComplexMatrix a(dim, dim);
    for (long i = 0; i < dim; ++i) {
        if (!std::getline(is, line)) fail("truncated at row " + std::to_string(i));
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<long>(vals.size()) != 2 * dim) fail("row " + std::to_string(i) + " has wrong width");
        for (long j = 0; j < dim; ++j) a(i, j) = cdouble(vals[2 * j], vals[2 * j + 1]);
    }
    return CovarianceMatrix(a, label);
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_COVARIANCE_HPP
