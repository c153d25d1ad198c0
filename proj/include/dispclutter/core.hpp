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

#ifndef DISPCLUTTER_CORE_HPP
#define DISPCLUTTER_CORE_HPP

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace dispclutter {

using cdouble = std::complex<double>;

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr cdouble kJ{0.0, 1.0};

/// Speed of light in vacuum [m/s].
inline constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
    InvalidArgument,
    UnsupportedSmoothness,
    NotPositiveSemidefinite,
    InvalidFrequency,
    GridMismatch,
    DegenerateMedium,
    InvalidChannel,
    DimensionMismatch,
    InsufficientSamples,
    UndefinedMetric,
    InvalidTruncation,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnsupportedSmoothness: return "UnsupportedSmoothness";
    case ErrorKind::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorKind::InvalidFrequency: return "InvalidFrequency";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::DegenerateMedium: return "DegenerateMedium";
    case ErrorKind::InvalidChannel: return "InvalidChannel";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::UndefinedMetric: return "UndefinedMetric";
    case ErrorKind::InvalidTruncation: return "InvalidTruncation";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` distinguishes failure classes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

}  // namespace detail

/// ||estimate - truth||_F / ||truth||_F. Used for every "relative error" in the project.
template <typename DerivedA, typename DerivedB>
double relative_error(const Eigen::MatrixBase<DerivedA>& estimate,
                      const Eigen::MatrixBase<DerivedB>& truth) {
    detail::require(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(),
                    ErrorKind::DimensionMismatch, "relative_error: shape mismatch");
    const double denom = truth.norm();
    detail::require(denom > 0.0, ErrorKind::UndefinedMetric, "relative_error: zero reference");
    return (estimate - truth).norm() / denom;
}

/// Relative error with 0/0 defined as 0 (used where a degenerate zero-randomness
/// configuration is a legitimate input).
template <typename DerivedA, typename DerivedB>
double guarded_relative_error(const Eigen::MatrixBase<DerivedA>& estimate,
                              const Eigen::MatrixBase<DerivedB>& truth) {
    if (truth.norm() == 0.0)
        return estimate.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return relative_error(estimate, truth);
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_CORE_HPP
