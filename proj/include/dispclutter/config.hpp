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

// Experiment configuration and its JSON form. Every field has a default, so
// an empty object is a complete configuration.

#ifndef DISPCLUTTER_CONFIG_HPP
#define DISPCLUTTER_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dispclutter/core.hpp"
#include "dispclutter/covariance.hpp"
#include "dispclutter/dielectric.hpp"
#include "dispclutter/propagation.hpp"
#include "dispclutter/relaxation_field.hpp"

namespace dispclutter {

using Json = nlohmann::json;

struct MediumConfig {
    double eps_inf = 4.0;
    double center_tau = 1e-9;  // bump centre, seconds
    double width = 0.8;        // in log(tau) units
    double strength = 4.0;     // integral of the nominal density

    bool operator==(const MediumConfig&) const = default;
};

struct FieldConfig {
    double sigma_g = 0.03;
    double nu = 1.5;
    double ell = 1.0;
    int grid_points = 128;
    double tau_min = 1e-11;
    double tau_max = 1e-7;

    bool operator==(const FieldConfig&) const = default;
};

struct SystemConfig {
    double f0 = 100e6;
    double delta_f = 2e6;
    int channels = 10;
    double spacing = 0.0;  // 0: half a wavelength in the nominal medium at f0

    bool operator==(const SystemConfig&) const = default;
};

struct SceneConfig {
    double theta_min_deg = -30.0;
    double theta_max_deg = 30.0;
    int n_theta = 5;
    double r_min = 0.3;
    double r_max = 1.5;
    int n_r = 5;
    double sigma_beta_sq = 1.0;
    int target_patch = -1;  // -1: grid centre

    bool operator==(const SceneConfig&) const = default;
};

struct McConfig {
    int n_mc = 2000;
    std::uint64_t seed = 20260315;
    int threads = 0;  // 0: hardware concurrency; results do not depend on it

    bool operator==(const McConfig&) const = default;
};

struct Thresholds {
    double stage_a_cov = 0.05;
    double stage_b_cov = 0.05;
    double stage_b_lin = 0.05;
    double stage_c_cov = 0.08;
    double stage_c_lin = 0.08;
    double stage_d_rmed = 0.08;
    double stage_d_rc = 0.08;
    double hermitian_residual = 1e-12;
    double min_eigenvalue = -1e-10;
    double reff_gap = 0.05;
    double eta_gap = 0.01;
    double closure = 1e-12;
    double kl_reff_gap = 1e-10;
    double sigma_ratio_spread = 0.30;
    double sigma_cov_variation = 0.50;
    double nmc_stage_a_factor = 3.0;
    double nmc_rc_variation = 0.10;
    double seed_spread = 0.20;
    double near_margin = 0.15;

    bool operator==(const Thresholds&) const = default;
};

struct ScanConfig {
    std::vector<double> sigmas{0.01, 0.03, 0.05};
    std::vector<int> counts{200, 500, 1000, 2000};
    std::vector<std::uint64_t> seeds{20260315, 20260316, 20260317, 20260318, 20260319};
    std::vector<double> nus{0.5, 1.5, 2.5};
    std::vector<double> ell_scales{0.5, 1.0, 2.0};
    std::vector<double> matern_sigmas{0.03, 0.05};

    bool operator==(const ScanConfig&) const = default;
};

struct ExperimentConfig {
    MediumConfig medium;
    FieldConfig field;
    SystemConfig system;
    SceneConfig scene;
    McConfig mc;
    Thresholds thresholds;
    double rho = 0.9;
    ScanConfig scans;

    bool operator==(const ExperimentConfig&) const = default;

    MaternParams matern() const { return MaternParams{field.sigma_g, field.nu, field.ell}; }

    LogTauGrid grid() const { return LogTauGrid::uniform(std::log(field.tau_min), std::log(field.tau_max), field.grid_points); }

    int target_index() const { return target_patch_index(scene); }

    static int target_patch_index(const SceneConfig& s) {
        return s.target_patch >= 0 ? s.target_patch : (s.n_theta / 2) * s.n_r + s.n_r / 2;
    }

    void validate() const {
        using detail::require;
        const auto cfg = ErrorKind::ConfigError;
        require(medium.eps_inf >= 1.0, cfg, "medium.eps_inf: NominalSpectrum requires eps_inf >= 1");
        require(medium.center_tau > 0.0, cfg, "medium.center_tau must be > 0");
        require(medium.width > 0.0, cfg, "medium.width must be > 0");
        require(medium.strength >= 0.0, cfg, "medium.strength must be >= 0");
        try {
            matern().validate();
        } catch (const Error& e) {
            throw Error(e.kind(), std::string("field: ") + e.what());
        }
        require(field.grid_points >= 2, cfg, "field.grid_points must be >= 2");
        require(field.tau_min > 0.0 && field.tau_max > field.tau_min, cfg, "field: need 0 < tau_min < tau_max");
        require(system.f0 > 0.0, ErrorKind::InvalidFrequency, "system.f0 must be > 0");
        require(system.delta_f >= 0.0, cfg, "system.delta_f must be >= 0");
        require(system.channels >= 1, cfg, "system.channels must be >= 1");
        require(system.spacing >= 0.0, cfg, "system.spacing must be >= 0");
        require(scene.n_theta >= 1 && scene.n_r >= 1, cfg, "scene: grid must have at least one patch");
        require(scene.theta_max_deg >= scene.theta_min_deg, cfg, "scene: theta_max_deg < theta_min_deg");
        require(scene.theta_min_deg > -90.0 && scene.theta_max_deg < 90.0, cfg, "scene: |theta| must be < 90 deg");
        require(scene.r_min > 0.0 && scene.r_max >= scene.r_min, cfg, "scene: need 0 < r_min <= r_max");
        require(scene.sigma_beta_sq >= 0.0, cfg, "scene.sigma_beta_sq must be >= 0");
        require(target_index() >= 0 && target_index() < scene.n_theta * scene.n_r, cfg,
                "scene.target_patch out of range");
        require(mc.n_mc >= 2, ErrorKind::InsufficientSamples, "mc.n_mc must be >= 2");
        require(mc.threads >= 0, cfg, "mc.threads must be >= 0");
        require(rho > 0.0 && rho < 1.0, cfg, "rho must be in (0, 1)");
        for (double t : {thresholds.stage_a_cov, thresholds.stage_b_cov, thresholds.stage_b_lin, thresholds.stage_c_cov,
                         thresholds.stage_c_lin, thresholds.stage_d_rmed, thresholds.stage_d_rc,
                         thresholds.hermitian_residual, thresholds.reff_gap, thresholds.eta_gap, thresholds.closure,
                         thresholds.kl_reff_gap, thresholds.sigma_ratio_spread, thresholds.sigma_cov_variation,
                         thresholds.nmc_stage_a_factor, thresholds.nmc_rc_variation, thresholds.seed_spread})
            require(t > 0.0, cfg, "thresholds must be positive");
        require(thresholds.min_eigenvalue <= 0.0, cfg, "thresholds.min_eigenvalue is a lower bound and must be <= 0");
        require(!scans.sigmas.empty() && !scans.counts.empty() && !scans.seeds.empty(), cfg, "scans: empty list");
        require(!scans.nus.empty() && !scans.ell_scales.empty() && !scans.matern_sigmas.empty(), cfg,
                "scans: empty Matern list");
        for (int n : scans.counts) require(n >= 2, ErrorKind::InsufficientSamples, "scans.counts entries must be >= 2");
        for (double s : scans.sigmas) require(s >= 0.0, cfg, "scans.sigmas entries must be >= 0");
        for (double s : scans.ell_scales) require(s > 0.0, cfg, "scans.ell_scales entries must be > 0");
    }
};

// ---------------------------------------------------------------- JSON

namespace detail {

/// Rejects keys that the section does not define (typos would otherwise be
/// silently replaced by defaults).
inline void check_keys(const Json& j, const char* section, std::initializer_list<const char*> keys) {
    require(j.is_object(), ErrorKind::ConfigError, std::string(section) + ": expected an object");
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& item : j.items())
        require(known.count(item.key()) == 1, ErrorKind::ConfigError,
                std::string(section) + ": unknown key '" + item.key() + "'");
}

template <typename T>
void read_field(const Json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::ConfigError, std::string(section) + "." + key + ": wrong type (" + j.at(key).dump() + ")");
    }
}

}  // namespace detail

#define DISPCLUTTER_JSON_FIELD(key) j[#key] = v.key
#define DISPCLUTTER_JSON_READ(section, key) detail::read_field(j, section, #key, v.key)

inline void to_json(Json& j, const MediumConfig& v) {
    DISPCLUTTER_JSON_FIELD(eps_inf);
    DISPCLUTTER_JSON_FIELD(center_tau);
    DISPCLUTTER_JSON_FIELD(width);
    DISPCLUTTER_JSON_FIELD(strength);
}
inline void from_json(const Json& j, MediumConfig& v) {
    detail::check_keys(j, "medium", {"eps_inf", "center_tau", "width", "strength"});
    DISPCLUTTER_JSON_READ("medium", eps_inf);
    DISPCLUTTER_JSON_READ("medium", center_tau);
    DISPCLUTTER_JSON_READ("medium", width);
    DISPCLUTTER_JSON_READ("medium", strength);
}

inline void to_json(Json& j, const FieldConfig& v) {
    DISPCLUTTER_JSON_FIELD(sigma_g);
    DISPCLUTTER_JSON_FIELD(nu);
    DISPCLUTTER_JSON_FIELD(ell);
    DISPCLUTTER_JSON_FIELD(grid_points);
    DISPCLUTTER_JSON_FIELD(tau_min);
    DISPCLUTTER_JSON_FIELD(tau_max);
}
inline void from_json(const Json& j, FieldConfig& v) {
    detail::check_keys(j, "field", {"sigma_g", "nu", "ell", "grid_points", "tau_min", "tau_max"});
    DISPCLUTTER_JSON_READ("field", sigma_g);
    DISPCLUTTER_JSON_READ("field", nu);
    DISPCLUTTER_JSON_READ("field", ell);
    DISPCLUTTER_JSON_READ("field", grid_points);
    DISPCLUTTER_JSON_READ("field", tau_min);
    DISPCLUTTER_JSON_READ("field", tau_max);
}

inline void to_json(Json& j, const SystemConfig& v) {
    DISPCLUTTER_JSON_FIELD(f0);
    DISPCLUTTER_JSON_FIELD(delta_f);
    DISPCLUTTER_JSON_FIELD(channels);
    DISPCLUTTER_JSON_FIELD(spacing);
}
inline void from_json(const Json& j, SystemConfig& v) {
    detail::check_keys(j, "system", {"f0", "delta_f", "channels", "spacing"});
    DISPCLUTTER_JSON_READ("system", f0);
    DISPCLUTTER_JSON_READ("system", delta_f);
    DISPCLUTTER_JSON_READ("system", channels);
    DISPCLUTTER_JSON_READ("system", spacing);
}

inline void to_json(Json& j, const SceneConfig& v) {
    DISPCLUTTER_JSON_FIELD(theta_min_deg);
    DISPCLUTTER_JSON_FIELD(theta_max_deg);
    DISPCLUTTER_JSON_FIELD(n_theta);
    DISPCLUTTER_JSON_FIELD(r_min);
    DISPCLUTTER_JSON_FIELD(r_max);
    DISPCLUTTER_JSON_FIELD(n_r);
    DISPCLUTTER_JSON_FIELD(sigma_beta_sq);
    DISPCLUTTER_JSON_FIELD(target_patch);
}
inline void from_json(const Json& j, SceneConfig& v) {
    detail::check_keys(j, "scene",
                       {"theta_min_deg", "theta_max_deg", "n_theta", "r_min", "r_max", "n_r", "sigma_beta_sq",
                        "target_patch"});
    DISPCLUTTER_JSON_READ("scene", theta_min_deg);
    DISPCLUTTER_JSON_READ("scene", theta_max_deg);
    DISPCLUTTER_JSON_READ("scene", n_theta);
    DISPCLUTTER_JSON_READ("scene", r_min);
    DISPCLUTTER_JSON_READ("scene", r_max);
    DISPCLUTTER_JSON_READ("scene", n_r);
    DISPCLUTTER_JSON_READ("scene", sigma_beta_sq);
    DISPCLUTTER_JSON_READ("scene", target_patch);
}

inline void to_json(Json& j, const McConfig& v) {
    DISPCLUTTER_JSON_FIELD(n_mc);
    DISPCLUTTER_JSON_FIELD(seed);
    DISPCLUTTER_JSON_FIELD(threads);
}
inline void from_json(const Json& j, McConfig& v) {
    detail::check_keys(j, "mc", {"n_mc", "seed", "threads"});
    DISPCLUTTER_JSON_READ("mc", n_mc);
    DISPCLUTTER_JSON_READ("mc", seed);
    DISPCLUTTER_JSON_READ("mc", threads);
}

inline void to_json(Json& j, const Thresholds& v) {
    DISPCLUTTER_JSON_FIELD(stage_a_cov);
    DISPCLUTTER_JSON_FIELD(stage_b_cov);
    DISPCLUTTER_JSON_FIELD(stage_b_lin);
    DISPCLUTTER_JSON_FIELD(stage_c_cov);
    DISPCLUTTER_JSON_FIELD(stage_c_lin);
    DISPCLUTTER_JSON_FIELD(stage_d_rmed);
    DISPCLUTTER_JSON_FIELD(stage_d_rc);
    DISPCLUTTER_JSON_FIELD(hermitian_residual);
    DISPCLUTTER_JSON_FIELD(min_eigenvalue);
    DISPCLUTTER_JSON_FIELD(reff_gap);
    DISPCLUTTER_JSON_FIELD(eta_gap);
    DISPCLUTTER_JSON_FIELD(closure);
    DISPCLUTTER_JSON_FIELD(kl_reff_gap);
    DISPCLUTTER_JSON_FIELD(sigma_ratio_spread);
    DISPCLUTTER_JSON_FIELD(sigma_cov_variation);
    DISPCLUTTER_JSON_FIELD(nmc_stage_a_factor);
    DISPCLUTTER_JSON_FIELD(nmc_rc_variation);
    DISPCLUTTER_JSON_FIELD(seed_spread);
    DISPCLUTTER_JSON_FIELD(near_margin);
}
inline void from_json(const Json& j, Thresholds& v) {
    detail::check_keys(j, "thresholds",
                       {"stage_a_cov", "stage_b_cov", "stage_b_lin", "stage_c_cov", "stage_c_lin", "stage_d_rmed",
                        "stage_d_rc", "hermitian_residual", "min_eigenvalue", "reff_gap", "eta_gap", "closure",
                        "kl_reff_gap", "sigma_ratio_spread", "sigma_cov_variation", "nmc_stage_a_factor",
                        "nmc_rc_variation", "seed_spread", "near_margin"});
    DISPCLUTTER_JSON_READ("thresholds", stage_a_cov);
    DISPCLUTTER_JSON_READ("thresholds", stage_b_cov);
    DISPCLUTTER_JSON_READ("thresholds", stage_b_lin);
    DISPCLUTTER_JSON_READ("thresholds", stage_c_cov);
    DISPCLUTTER_JSON_READ("thresholds", stage_c_lin);
    DISPCLUTTER_JSON_READ("thresholds", stage_d_rmed);
    DISPCLUTTER_JSON_READ("thresholds", stage_d_rc);
    DISPCLUTTER_JSON_READ("thresholds", hermitian_residual);
    DISPCLUTTER_JSON_READ("thresholds", min_eigenvalue);
    DISPCLUTTER_JSON_READ("thresholds", reff_gap);
    DISPCLUTTER_JSON_READ("thresholds", eta_gap);
    DISPCLUTTER_JSON_READ("thresholds", closure);
    DISPCLUTTER_JSON_READ("thresholds", kl_reff_gap);
    DISPCLUTTER_JSON_READ("thresholds", sigma_ratio_spread);
    DISPCLUTTER_JSON_READ("thresholds", sigma_cov_variation);
    DISPCLUTTER_JSON_READ("thresholds", nmc_stage_a_factor);
    DISPCLUTTER_JSON_READ("thresholds", nmc_rc_variation);
    DISPCLUTTER_JSON_READ("thresholds", seed_spread);
    DISPCLUTTER_JSON_READ("thresholds", near_margin);
}

inline void to_json(Json& j, const ScanConfig& v) {
    DISPCLUTTER_JSON_FIELD(sigmas);
    DISPCLUTTER_JSON_FIELD(counts);
    DISPCLUTTER_JSON_FIELD(seeds);
    DISPCLUTTER_JSON_FIELD(nus);
    DISPCLUTTER_JSON_FIELD(ell_scales);
    DISPCLUTTER_JSON_FIELD(matern_sigmas);
}
inline void from_json(const Json& j, ScanConfig& v) {
    detail::check_keys(j, "scans", {"sigmas", "counts", "seeds", "nus", "ell_scales", "matern_sigmas"});
    DISPCLUTTER_JSON_READ("scans", sigmas);
    DISPCLUTTER_JSON_READ("scans", counts);
    DISPCLUTTER_JSON_READ("scans", seeds);
    DISPCLUTTER_JSON_READ("scans", nus);
    DISPCLUTTER_JSON_READ("scans", ell_scales);
    DISPCLUTTER_JSON_READ("scans", matern_sigmas);
}

inline void to_json(Json& j, const ExperimentConfig& v) {
    DISPCLUTTER_JSON_FIELD(medium);
    DISPCLUTTER_JSON_FIELD(field);
    DISPCLUTTER_JSON_FIELD(system);
    DISPCLUTTER_JSON_FIELD(scene);
    DISPCLUTTER_JSON_FIELD(mc);
    DISPCLUTTER_JSON_FIELD(thresholds);
    DISPCLUTTER_JSON_FIELD(rho);
    DISPCLUTTER_JSON_FIELD(scans);
}
inline void from_json(const Json& j, ExperimentConfig& v) {
    detail::check_keys(j, "config", {"medium", "field", "system", "scene", "mc", "thresholds", "rho", "scans"});
    if (j.contains("medium")) from_json(j.at("medium"), v.medium);
    if (j.contains("field")) from_json(j.at("field"), v.field);
    if (j.contains("system")) from_json(j.at("system"), v.system);
    if (j.contains("scene")) from_json(j.at("scene"), v.scene);
    if (j.contains("mc")) from_json(j.at("mc"), v.mc);
    if (j.contains("thresholds")) from_json(j.at("thresholds"), v.thresholds);
    DISPCLUTTER_JSON_READ("config", rho);
    if (j.contains("scans")) from_json(j.at("scans"), v.scans);
}

#undef DISPCLUTTER_JSON_FIELD
#undef DISPCLUTTER_JSON_READ

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hex FNV-1a of the canonical (sorted-key, compact) JSON of the config.
inline std::string config_hash(const ExperimentConfig& config) {
    const std::uint64_t h = fnv1a64(Json(config).dump());
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15, s = 0; i >= 0; --i, s += 4) out[static_cast<std::size_t>(i)] = digits[(h >> s) & 0xF];
    return out;
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_CONFIG_HPP
