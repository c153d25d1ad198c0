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

// Theory-vs-Monte-Carlo validation of the propagation chain (stages A-E),
// parameter scans and the modal truncation study.

#ifndef DISPCLUTTER_EXPERIMENT_HPP
#define DISPCLUTTER_EXPERIMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dispclutter/config.hpp"
#include "dispclutter/core.hpp"
#include "dispclutter/covariance.hpp"
#include "dispclutter/dielectric.hpp"
#include "dispclutter/modal_analysis.hpp"
#include "dispclutter/propagation.hpp"
#include "dispclutter/relaxation_field.hpp"
#include "dispclutter/rng.hpp"
#include "dispclutter/spectral_metrics.hpp"

namespace dispclutter {

// ---------------------------------------------------------------- reports

enum class Comparison { AtMost, AtLeast, Informational };

struct Metric {
    std::string name;
    double value = 0.0;
    Comparison comparison = Comparison::Informational;
    double threshold = 0.0;
    bool pass = true;
    bool near_threshold = false;  // passes with less than the configured relative margin
};

inline Metric at_most(std::string name, double value, double threshold, double margin = 0.0) {
    Metric m{std::move(name), value, Comparison::AtMost, threshold};
    m.pass = value <= threshold;  // NaN fails
    m.near_threshold = m.pass && margin > 0.0 && threshold - value < margin * std::abs(threshold);
    return m;
}

inline Metric at_least(std::string name, double value, double threshold, double margin = 0.0) {
    Metric m{std::move(name), value, Comparison::AtLeast, threshold};
    m.pass = value >= threshold;
    m.near_threshold = m.pass && margin > 0.0 && value - threshold < margin * std::abs(threshold);
    return m;
}

inline Metric informational(std::string name, double value) { return Metric{std::move(name), value}; }

struct StageReport {
    std::string stage;
    std::vector<Metric> metrics;
    std::string config_hash;
    std::uint64_t seed = 0;

    bool passed() const {
        return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
    }

    bool has(const std::string& name) const {
        return std::any_of(metrics.begin(), metrics.end(), [&](const Metric& m) { return m.name == name; });
    }

    const Metric& metric(const std::string& name) const {
        for (const auto& m : metrics)
            if (m.name == name) return m;
        throw Error(ErrorKind::InvalidArgument, "StageReport " + stage + ": no metric '" + name + "'");
    }

    double value(const std::string& name) const { return metric(name).value; }
};

/// Thrown when a stage fails; reports of the stages that completed are kept.
class StageFailure : public Error {
public:
    StageFailure(ErrorKind kind, std::string stage, const std::string& what, std::vector<StageReport> partial)
        : Error(kind, "stage " + stage + ": " + what), stage_(std::move(stage)), partial_(std::move(partial)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::vector<StageReport>& partial() const noexcept { return partial_; }

private:
    std::string stage_;
    std::vector<StageReport> partial_;
};

// ---------------------------------------------------------------- pipeline

namespace detail {

inline ArrayGeometry make_geometry(const ExperimentConfig& c, const NominalMedium& medium) {
    double spacing = c.system.spacing;
    if (spacing == 0.0) {
        const double n_re = std::sqrt(medium.permittivity(2.0 * kPi * c.system.f0)).real();
        spacing = 0.5 * kSpeedOfLight / (c.system.f0 * n_re);
    }
    ArrayGeometry g = ArrayGeometry::uniform(c.system.channels, spacing);
    g.validate();
    return g;
}

inline SceneGrid make_scene(const ExperimentConfig& c) {
    const double deg = kPi / 180.0;
    return SceneGrid::polar(c.scene.theta_min_deg * deg, c.scene.theta_max_deg * deg, c.scene.n_theta, c.scene.r_min,
                            c.scene.r_max, c.scene.n_r, c.system.channels, c.scene.sigma_beta_sq);
}

}  // namespace detail

/// Every seed-independent quantity of one configuration.
struct Pipeline {
    ExperimentConfig config;
    LogTauGrid grid;
    NominalMedium medium;
    FrequencyPlan plan;
    ChannelMedium channels;
    ArrayGeometry geometry;
    SceneGrid scene;
    KernelMatrix kernel;
    std::vector<SteeringKernel> steering;
    std::vector<CovarianceMatrix> local;  // R_a per patch
    CovarianceMatrix eps_cov;             // D K D^H over the channel frequencies
    CovarianceMatrix k_cov;               // diag(s) D K D^H diag(s)^H
    CovarianceMatrix r0, rmed, rc;
    std::size_t target;

    explicit Pipeline(const ExperimentConfig& c)
        : config(c),
          grid(c.grid()),
          medium{NominalSpectrum::gaussian_bump(grid, c.medium.eps_inf, std::log(c.medium.center_tau), c.medium.width,
                                                c.medium.strength),
                 grid},
          plan(FrequencyPlan::linear(c.system.f0, c.system.delta_f, c.system.channels)),
          channels(plan, medium),
          geometry(detail::make_geometry(c, medium)),
          scene(detail::make_scene(c)),
          kernel(build_kernel_matrix(grid, c.matern())),
          target(static_cast<std::size_t>(c.target_index())) {
        std::vector<ComplexVector> nominal;
        for (const auto& patch : scene.patches) {
            steering.push_back(steering_kernel(geometry, channels, patch, grid));
            local.push_back(local_steering_covariance(steering.back(), kernel));
            nominal.push_back(steering.back().nominal);
        }
        const ComplexMatrix c_eps = channels.debye * kernel.entries.cast<cdouble>() * channels.debye.adjoint();
        eps_cov = CovarianceMatrix(c_eps, "C_eps");
        const auto s = channels.sensitivity.asDiagonal();
        k_cov = CovarianceMatrix(s * c_eps * channels.sensitivity.conjugate().asDiagonal(), "C_k");
        r0 = nominal_covariance(scene, nominal);
        rmed = medium_covariance(scene, local);
        rc = total_covariance(r0, rmed);
    }

    const ComplexVector& target_steering() const { return steering.at(target).nominal; }
};

// ---------------------------------------------------------------- Monte Carlo

struct MonteCarloStats {
    SecondMomentAccumulator eps;      // channel permittivity perturbations
    SecondMomentAccumulator k;        // exact wavenumber perturbations
    double k_lin_sq = 0.0;            // sum over samples and channels of squared relative linearization error
    std::vector<double> patch_lin_sq; // per patch, sum over samples
    ClutterMonteCarlo clutter;
    long branch_switches = 0;

    explicit MonteCarloStats(const Pipeline& pipe)
        : eps(pipe.channels.channels()),
          k(pipe.channels.channels()),
          patch_lin_sq(pipe.scene.size(), 0.0),
          clutter(pipe.scene, nominal_vectors(pipe)) {}

    std::size_t count() const noexcept { return eps.count(); }

    void merge(const MonteCarloStats& other) {
        eps.merge(other.eps);
        k.merge(other.k);
        k_lin_sq += other.k_lin_sq;
        for (std::size_t p = 0; p < patch_lin_sq.size(); ++p) patch_lin_sq[p] += other.patch_lin_sq[p];
        clutter.merge(other.clutter);
        branch_switches += other.branch_switches;
    }

private:
    static std::vector<ComplexVector> nominal_vectors(const Pipeline& pipe) {
        std::vector<ComplexVector> out;
        for (const auto& s : pipe.steering) out.push_back(s.nominal);
        return out;
    }
};

namespace detail {

/// |num|^2 / |den|^2 with 0/0 = 0.
inline double ratio_sq(double num_sq, double den_sq) {
    if (den_sq == 0.0) return num_sq == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num_sq / den_sq;
}

inline void accumulate_realization(const Pipeline& pipe, const FieldRealization& f, MonteCarloStats& s) {
    const ChannelPerturbation cp = channel_perturbation(pipe.channels, f);
    s.eps.add(cp.delta_eps);
    s.k.add(cp.delta_k_exact);
    s.branch_switches += cp.branch_switches;
    for (Eigen::Index m = 0; m < cp.delta_k_exact.size(); ++m)
        s.k_lin_sq += ratio_sq(std::norm(cp.delta_k_exact[m] - cp.delta_k_linear[m]), std::norm(cp.delta_k_exact[m]));
    for (std::size_t p = 0; p < pipe.steering.size(); ++p) {
        const SteeringKernel& sk = pipe.steering[p];
        const ComplexVector exact = steering_perturbation_from_wavenumber(sk.nominal, sk.lengths, cp.delta_k_exact);
        const ComplexVector linear = perturb_steering_first_order(sk, f);
        s.patch_lin_sq[p] += ratio_sq((exact - linear).squaredNorm(), exact.squaredNorm());
        s.clutter.add(p, exact, linear);
    }
}

}  // namespace detail

/// Realizations are processed in fixed blocks of this size and merged in block
/// order, so the statistics do not depend on the thread count.
inline constexpr std::size_t kMonteCarloBlock = 64;

inline unsigned resolve_threads(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Realizations 0 .. n-1 of the seeded stream. Realization i is the same for
/// every n, so a larger run extends a smaller one.
inline MonteCarloStats run_monte_carlo(const Pipeline& pipe, std::size_t n, std::uint64_t seed, unsigned threads = 1) {
    detail::require(n >= 2, ErrorKind::InsufficientSamples,
                    "run_monte_carlo: need at least 2 realizations, got " + std::to_string(n));
    const FieldSampler sampler(pipe.kernel);
    const SeedStream stream(seed);
    const std::size_t blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
    std::vector<std::optional<MonteCarloStats>> parts(blocks);
    std::vector<std::exception_ptr> errors(blocks);
    auto run_block = [&](std::size_t b) {
        try {
            MonteCarloStats s(pipe);
            const std::size_t end = std::min(n, (b + 1) * kMonteCarloBlock);
            for (std::size_t i = b * kMonteCarloBlock; i < end; ++i)
                detail::accumulate_realization(pipe, sampler.draw(stream, i), s);
            parts[b].emplace(std::move(s));
        } catch (...) {
            errors[b] = std::current_exception();
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
    if (threads == 1) {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t b = t; b < blocks; b += threads) run_block(b);
            });
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    MonteCarloStats total(pipe);
    for (const auto& part : parts) total.merge(*part);
    return total;
}

// ---------------------------------------------------------------- bound audit

struct BoundSummary {
    int checked = 0;
    int violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();

    void add(const CovarianceMatrix& c, double rho) {
        if (c.frobenius() == 0.0) return;  // r_eff undefined; the bound is vacuous
        const BoundCheck b = bound_check(eigen_spectrum(c), rho);
        ++checked;
        if (!b.holds) ++violations;
        min_slack = std::min(min_slack, b.slack);
    }

    void merge(const BoundSummary& o) {
        checked += o.checked;
        violations += o.violations;
        min_slack = std::min(min_slack, o.min_slack);
    }
};

// ---------------------------------------------------------------- baseline

struct BaselineRun {
    std::vector<StageReport> reports;  // A, B, C, D, E
    BoundSummary bounds;
    std::vector<double> patch_lin_rms;
    std::vector<double> patch_cov_error;
    CovarianceMatrix eps_theory, k_theory, rmed_theory, rc_theory;
    CovarianceMatrix eps_mc, k_mc, rmed_mc, rc_mc;

    const StageReport& stage(const std::string& name) const {
        for (const auto& r : reports)
            if (r.stage == name) return r;
        throw Error(ErrorKind::InvalidArgument, "BaselineRun: no stage " + name);
    }

    bool passed() const {
        return std::all_of(reports.begin(), reports.end(), [](const StageReport& r) { return r.passed(); });
    }
};

namespace detail {

struct SpectralSummary {
    double r_eff = 0.0;
    int p_rho = 0;
    double gamma = 0.0;
    double eta = 0.0;
};

inline SpectralSummary spectral_summary(const CovarianceMatrix& c, double rho, const ComplexVector& target) {
    const EigenSpectrum s = eigen_spectrum(c);
    const int p = effective_subspace_dim(s, rho);
    const SeparabilityReport sep = separability(s, p, target);
    return SpectralSummary{effective_rank(s), p, sep.gamma, sep.eta};
}

}  // namespace detail

inline BaselineRun run_baseline(const ExperimentConfig& config) {
    config.validate();
    const Thresholds& t = config.thresholds;
    const double margin = t.near_margin;
    const std::string hash = config_hash(config);
    BaselineRun run;
    std::string current = "setup";
    auto new_report = [&](const char* stage) {
        current = stage;
        return StageReport{stage, {}, hash, config.mc.seed};
    };
    try {
        const Pipeline pipe(config);
        const std::size_t n = static_cast<std::size_t>(config.mc.n_mc);
        const MonteCarloStats mc = run_monte_carlo(pipe, n, config.mc.seed, resolve_threads(config.mc.threads));
        const double nd = static_cast<double>(n);
        const double m_channels = static_cast<double>(pipe.channels.channels());

        StageReport a = new_report("A");
        run.eps_theory = pipe.eps_cov;
        run.eps_mc = CovarianceMatrix(mc.eps.mean(), "C_eps_mc");
        a.metrics.push_back(at_most("permittivity_cov_error", guarded_relative_error(run.eps_mc.entries(),
                                                                                     run.eps_theory.entries()),
                                    t.stage_a_cov, margin));
        a.metrics.push_back(informational("n_mc", nd));
        run.reports.push_back(a);

        StageReport b = new_report("B");
        run.k_theory = pipe.k_cov;
        run.k_mc = CovarianceMatrix(mc.k.mean(), "C_k_mc");
        b.metrics.push_back(at_most("wavenumber_cov_error",
                                    guarded_relative_error(run.k_mc.entries(), run.k_theory.entries()), t.stage_b_cov,
                                    margin));
        b.metrics.push_back(at_most("wavenumber_lin_rms", std::sqrt(mc.k_lin_sq / (nd * m_channels)), t.stage_b_lin,
                                    margin));
        run.reports.push_back(b);

        StageReport c = new_report("C");
        double worst_cov = 0.0, worst_lin = 0.0;
        std::size_t worst_cov_p = 0, worst_lin_p = 0;
        for (std::size_t p = 0; p < pipe.scene.size(); ++p) {
            const double ce = guarded_relative_error(mc.clutter.sample_ra(p, PerturbationMode::Exact),
                                                     pipe.local[p].entries());
            const double le = std::sqrt(mc.patch_lin_sq[p] / nd);
            run.patch_cov_error.push_back(ce);
            run.patch_lin_rms.push_back(le);
            if (ce > worst_cov || p == 0) worst_cov = ce, worst_cov_p = p;
            if (le > worst_lin || p == 0) worst_lin = le, worst_lin_p = p;
        }
        c.metrics.push_back(at_most("steering_cov_error_max", worst_cov, t.stage_c_cov, margin));
        c.metrics.push_back(at_most("steering_lin_rms_max", worst_lin, t.stage_c_lin, margin));
        c.metrics.push_back(informational("steering_cov_worst_patch", static_cast<double>(worst_cov_p)));
        c.metrics.push_back(informational("steering_lin_worst_patch", static_cast<double>(worst_lin_p)));
        run.reports.push_back(c);

        StageReport d = new_report("D");
        run.rmed_theory = pipe.rmed;
        run.rc_theory = pipe.rc;
        run.rmed_mc = mc.clutter.medium_covariance(PerturbationMode::Exact);
        run.rc_mc = mc.clutter.clutter_covariance(PerturbationMode::Exact, ClutterEstimator::Direct);
        d.metrics.push_back(at_most("rmed_error", guarded_relative_error(run.rmed_mc.entries(), pipe.rmed.entries()),
                                    t.stage_d_rmed, margin));
        d.metrics.push_back(
            at_most("rc_error", guarded_relative_error(run.rc_mc.entries(), pipe.rc.entries()), t.stage_d_rc, margin));
        double herm = 0.0, min_eig = std::numeric_limits<double>::infinity();
        for (const CovarianceMatrix* m : std::initializer_list<const CovarianceMatrix*>{&pipe.r0, &pipe.rmed, &pipe.rc, &run.rmed_mc, &run.rc_mc}) {
            herm = std::max(herm, m->scaled_hermitian_residual());
            min_eig = std::min(min_eig, m->scaled_min_eigenvalue());
        }
        d.metrics.push_back(at_most("hermitian_residual", herm, t.hermitian_residual));
        d.metrics.push_back(at_least("min_eigenvalue", min_eig, t.min_eigenvalue));
        const CovarianceMatrix rmed_first = mc.clutter.medium_covariance(PerturbationMode::FirstOrder);
        const CovarianceMatrix rc_decomposed = mc.clutter.clutter_covariance(PerturbationMode::Exact,
                                                                             ClutterEstimator::Decomposed);
        d.metrics.push_back(informational("rmed_error_first_order",
                                          guarded_relative_error(rmed_first.entries(), pipe.rmed.entries())));
        d.metrics.push_back(informational("rc_error_decomposed",
                                          guarded_relative_error(rc_decomposed.entries(), pipe.rc.entries())));
        d.metrics.push_back(informational("medium_fraction", pipe.rmed.frobenius() / pipe.rc.frobenius()));
        d.metrics.push_back(informational("branch_switches", static_cast<double>(mc.branch_switches)));
        run.reports.push_back(d);

        StageReport e = new_report("E");
        const auto& target = pipe.target_steering();
        const auto th = detail::spectral_summary(pipe.rc, config.rho, target);
        const auto em = detail::spectral_summary(run.rc_mc, config.rho, target);
        e.metrics.push_back(informational("r_eff_theory", th.r_eff));
        e.metrics.push_back(informational("r_eff_mc", em.r_eff));
        e.metrics.push_back(at_most("r_eff_gap", std::abs(th.r_eff - em.r_eff), t.reff_gap, margin));
        e.metrics.push_back(informational("p_rho_theory", th.p_rho));
        e.metrics.push_back(informational("p_rho_mc", em.p_rho));
        e.metrics.push_back(at_most("p_rho_gap", std::abs(th.p_rho - em.p_rho), 0.0));
        e.metrics.push_back(informational("eta_theory", th.eta));
        e.metrics.push_back(informational("eta_mc", em.eta));
        e.metrics.push_back(at_most("eta_gap", std::abs(th.eta - em.eta), t.eta_gap, margin));
        e.metrics.push_back(informational("gamma_theory", th.gamma));
        e.metrics.push_back(informational("gamma_mc", em.gamma));
        if (pipe.rmed.frobenius() > 0.0) {
            const double mu = alignment_mu(pipe.r0, pipe.rmed);
            const double via_mu = effective_rank_from_alignment(pipe.r0.trace(), pipe.rmed.trace(), pipe.r0.frobenius(),
                                                                pipe.rmed.frobenius(), mu);
            e.metrics.push_back(informational("alignment_mu", mu));
            e.metrics.push_back(informational("r_eff_alignment_form_error", std::abs(via_mu - th.r_eff) / th.r_eff));
        }
        e.metrics.push_back(informational("target_patch", static_cast<double>(pipe.target)));

        current = "bounds";
        const double rho = config.rho;
        for (const CovarianceMatrix* m : std::initializer_list<const CovarianceMatrix*>{&run.eps_theory, &run.eps_mc, &run.k_theory, &run.k_mc, &pipe.r0,
                                          &pipe.rmed, &pipe.rc, &run.rmed_mc, &run.rc_mc})
            run.bounds.add(*m, rho);
        for (std::size_t p = 0; p < pipe.scene.size(); ++p) {
            run.bounds.add(pipe.local[p], rho);
            run.bounds.add(mc.clutter.sample_local(p, PerturbationMode::Exact), rho);
        }
        e.metrics.push_back(informational("bound_checked", run.bounds.checked));
        e.metrics.push_back(at_most("bound_violations", run.bounds.violations, 0.0));
        e.metrics.push_back(informational("bound_min_slack", run.bounds.min_slack));
        run.reports.push_back(e);
    } catch (const Error& err) {
        throw StageFailure(err.kind(), current, err.what(), run.reports);
    }
    return run;
}

// ---------------------------------------------------------------- scans

struct ScanResult {
    std::string axis;
    std::vector<std::string> labels;  // one per scanned value
    std::vector<double> values;
    std::vector<BaselineRun> runs;
    StageReport trends;               // scan-level verdicts

    bool passed() const { return trends.passed(); }
};

namespace detail {

/// (max - min) / min.
inline double relative_variation(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == 0.0) return *hi == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (*hi - *lo) / *lo;
}

/// max |v - mean| / mean.
inline double relative_spread(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double dev = 0.0;
    for (double x : v) dev = std::max(dev, std::abs(x - mean));
    if (mean == 0.0) return dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return dev / mean;
}

inline bool strictly_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

inline bool non_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] >= v[i - 1])) return false;
    return true;
}

inline bool non_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] <= v[i - 1])) return false;
    return true;
}

inline std::vector<double> collect(const std::vector<BaselineRun>& runs, const char* stage, const char* metric) {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(r.stage(stage).value(metric));
    return out;
}

inline std::string format_value(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

inline bool bitwise_equal(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(cdouble) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace detail

/// Perturbation-strength scan. Values are taken in the given order; trend
/// checks expect them ascending.
inline ScanResult run_sigma_scan(const ExperimentConfig& config, std::vector<double> sigmas = {}) {
    if (sigmas.empty()) sigmas = config.scans.sigmas;
    const Thresholds& t = config.thresholds;
    ScanResult out{"sigma_g", {}, sigmas, {}, StageReport{"scan-sigma", {}, config_hash(config), config.mc.seed}};
    for (double s : sigmas) {
        ExperimentConfig c = config;
        c.field.sigma_g = s;
        out.labels.push_back(detail::format_value(s));
        out.runs.push_back(run_baseline(c));
    }
    // The sigma = 0 point is degenerate (all errors 0) and is left out of the
    // ratio and variation statistics.
    std::vector<double> lin_all = detail::collect(out.runs, "C", "steering_lin_rms_max");
    std::vector<double> ratio, err_a, err_b, err_rmed, err_rc, lin;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i] == 0.0) continue;
        const BaselineRun& r = out.runs[i];
        lin.push_back(lin_all[i]);
        ratio.push_back(lin_all[i] / sigmas[i]);
        err_a.push_back(r.stage("A").value("permittivity_cov_error"));
        err_b.push_back(r.stage("B").value("wavenumber_cov_error"));
        err_rmed.push_back(r.stage("D").value("rmed_error"));
        err_rc.push_back(r.stage("D").value("rc_error"));
    }
    auto& m = out.trends.metrics;
    m.push_back(at_least("lin_rms_strictly_increasing", detail::strictly_increasing(lin_all) ? 1.0 : 0.0, 1.0));
    if (!ratio.empty()) {
        m.push_back(at_most("lin_rms_to_sigma_spread", detail::relative_spread(ratio), t.sigma_ratio_spread));
        m.push_back(at_most("stage_a_variation", detail::relative_variation(err_a), t.sigma_cov_variation));
        m.push_back(at_most("stage_b_variation", detail::relative_variation(err_b), t.sigma_cov_variation));
        m.push_back(at_most("stage_d_rmed_variation", detail::relative_variation(err_rmed), t.sigma_cov_variation));
        m.push_back(informational("stage_d_rc_variation", detail::relative_variation(err_rc)));
    }
    const auto reff = detail::collect(out.runs, "E", "r_eff_theory");
    m.push_back(informational("r_eff_non_decreasing", detail::non_decreasing(reff) ? 1.0 : 0.0));
    const auto gamma = detail::collect(out.runs, "E", "gamma_theory");
    m.push_back(informational("gamma_non_decreasing", detail::non_decreasing(gamma) ? 1.0 : 0.0));
    return out;
}

/// Sample-size scan on nested streams: the runs share their first realizations.
inline ScanResult run_nmc_scan(const ExperimentConfig& config, std::vector<int> counts = {}) {
    if (counts.empty()) counts = config.scans.counts;
    for (int n : counts)
        detail::require(n >= 2, ErrorKind::InsufficientSamples,
                        "run_nmc_scan: n_mc must be >= 2, got " + std::to_string(n));
    const Thresholds& t = config.thresholds;
    ScanResult out{"n_mc", {}, {}, {}, StageReport{"scan-nmc", {}, config_hash(config), config.mc.seed}};
    for (int n : counts) {
        ExperimentConfig c = config;
        c.mc.n_mc = n;
        out.labels.push_back(std::to_string(n));
        out.values.push_back(n);
        out.runs.push_back(run_baseline(c));
    }
    const auto err_a = detail::collect(out.runs, "A", "permittivity_cov_error");
    const auto err_rc = detail::collect(out.runs, "D", "rc_error");
    const auto lo = std::min_element(counts.begin(), counts.end()) - counts.begin();
    const auto hi = std::max_element(counts.begin(), counts.end()) - counts.begin();
    const double factor = err_a[static_cast<std::size_t>(hi)] > 0.0
                              ? err_a[static_cast<std::size_t>(lo)] / err_a[static_cast<std::size_t>(hi)]
                              : std::numeric_limits<double>::infinity();
    auto& m = out.trends.metrics;
    m.push_back(at_least("stage_a_reduction_factor", factor, t.nmc_stage_a_factor));
    m.push_back(at_most("rc_error_variation", detail::relative_variation(err_rc), t.nmc_rc_variation));
    m.push_back(informational("stage_a_non_increasing", detail::non_increasing(err_a) ? 1.0 : 0.0));
    m.push_back(informational("rmed_non_increasing",
                              detail::non_increasing(detail::collect(out.runs, "D", "rmed_error")) ? 1.0 : 0.0));
    return out;
}

inline ScanResult run_seed_scan(const ExperimentConfig& config, std::vector<std::uint64_t> seeds = {}) {
    if (seeds.empty()) seeds = config.scans.seeds;
    const Thresholds& t = config.thresholds;
    ScanResult out{"seed", {}, {}, {}, StageReport{"scan-seed", {}, config_hash(config), config.mc.seed}};
    for (std::uint64_t s : seeds) {
        ExperimentConfig c = config;
        c.mc.seed = s;
        out.labels.push_back(std::to_string(s));
        out.values.push_back(static_cast<double>(s));
        out.runs.push_back(run_baseline(c));
    }
    bool identical = true;
    const BaselineRun& ref = out.runs.front();
    for (const auto& r : out.runs) {
        identical = identical && detail::bitwise_equal(r.eps_theory.entries(), ref.eps_theory.entries()) &&
                    detail::bitwise_equal(r.k_theory.entries(), ref.k_theory.entries()) &&
                    detail::bitwise_equal(r.rmed_theory.entries(), ref.rmed_theory.entries()) &&
                    detail::bitwise_equal(r.rc_theory.entries(), ref.rc_theory.entries());
        for (const char* name : {"r_eff_theory", "p_rho_theory", "eta_theory", "gamma_theory"}) {
            const double a = r.stage("E").value(name), b = ref.stage("E").value(name);
            identical = identical && std::memcmp(&a, &b, sizeof(double)) == 0;
        }
    }
    auto& m = out.trends.metrics;
    m.push_back(at_most("rc_error_spread", detail::relative_spread(detail::collect(out.runs, "D", "rc_error")),
                        t.seed_spread));
    m.push_back(at_most("lin_rms_spread",
                        detail::relative_spread(detail::collect(out.runs, "C", "steering_lin_rms_max")), t.seed_spread));
    m.push_back(at_least("theory_bitwise_identical", identical ? 1.0 : 0.0, 1.0));
    return out;
}

struct MaternGroup {
    std::string by;  // "sigma_g", "ell_scale" or "nu"
    double key;
    double mean_lin_rms;
    int members;
};

struct MaternScan {
    ScanResult scan;  // labels "nu=..,ell_scale=..,sigma_g=.."
    std::vector<double> nus, ell_scales, sigmas;  // per run
    std::vector<MaternGroup> groups;
};

/// Grid over smoothness, correlation-length multiplier and amplitude. The
/// multiplier scales the configured ell.
inline MaternScan run_matern_scan(const ExperimentConfig& config, std::vector<double> nus = {},
                                  std::vector<double> ell_scales = {}, std::vector<double> sigmas = {}) {
    if (nus.empty()) nus = config.scans.nus;
    if (ell_scales.empty()) ell_scales = config.scans.ell_scales;
    if (sigmas.empty()) sigmas = config.scans.matern_sigmas;
    std::sort(ell_scales.begin(), ell_scales.end());
    std::sort(sigmas.begin(), sigmas.end());
    MaternScan out;
    out.scan = ScanResult{"matern", {}, {}, {}, StageReport{"scan-matern", {}, config_hash(config), config.mc.seed}};
    for (double nu : nus)
        for (double ls : ell_scales)
            for (double s : sigmas) {
                ExperimentConfig c = config;
                c.field.nu = nu;
                c.field.ell = config.field.ell * ls;
                c.field.sigma_g = s;
                out.scan.labels.push_back("nu=" + detail::format_value(nu) + ",ell_scale=" + detail::format_value(ls) +
                                          ",sigma_g=" + detail::format_value(s));
                out.scan.values.push_back(static_cast<double>(out.scan.runs.size()));
                out.nus.push_back(nu);
                out.ell_scales.push_back(ls);
                out.sigmas.push_back(s);
                out.scan.runs.push_back(run_baseline(c));
            }
    const auto lin = detail::collect(out.scan.runs, "C", "steering_lin_rms_max");
    auto group = [&](const char* by, const std::vector<double>& keys, const std::vector<double>& per_run) {
        std::vector<double> means;
        for (double k : keys) {
            double sum = 0.0;
            int count = 0;
            for (std::size_t i = 0; i < per_run.size(); ++i)
                if (per_run[i] == k) sum += lin[i], ++count;
            out.groups.push_back(MaternGroup{by, k, sum / count, count});
            means.push_back(sum / count);
        }
        return means;
    };
    const auto by_sigma = group("sigma_g", sigmas, out.sigmas);
    const auto by_ell = group("ell_scale", ell_scales, out.ell_scales);
    group("nu", nus, out.nus);
    int accepted = 0;
    for (const auto& r : out.scan.runs) accepted += r.stage("C").metric("steering_lin_rms_max").pass ? 1 : 0;
    auto& m = out.scan.trends.metrics;
    m.push_back(at_least("sigma_group_strictly_increasing", detail::strictly_increasing(by_sigma) ? 1.0 : 0.0, 1.0));
    m.push_back(at_least("ell_group_non_decreasing", detail::non_decreasing(by_ell) ? 1.0 : 0.0, 1.0));
    m.push_back(informational("combinations", static_cast<double>(lin.size())));
    m.push_back(informational("combinations_within_stage_c", accepted));
    return out;
}

// ---------------------------------------------------------------- modal study

struct ModalRow {
    int q;
    double global_closure;
    double local_center;
    double local_left;
    double local_right;
    double r_eff_q;
    double kl_energy_q;
};

struct ModalRun {
    std::vector<ModalRow> rows;
    StageReport report;
    std::vector<std::size_t> local_patches;  // centre, edge-left, edge-right
};

inline ModalRun run_modal(const ExperimentConfig& config) {
    config.validate();
    const Thresholds& t = config.thresholds;
    const Pipeline pipe(config);
    const KLBasis kl = kl_decompose(pipe.kernel);
    const ModalSet set = build_modal_set(pipe.scene, pipe.steering, kl);
    const RealVector energy = kl_energy_curve(kl);
    const int n_r = config.scene.n_r;
    const std::size_t center = static_cast<std::size_t>((config.scene.n_theta / 2) * n_r + n_r / 2);
    const std::size_t left = static_cast<std::size_t>(n_r / 2);
    const std::size_t right = static_cast<std::size_t>((config.scene.n_theta - 1) * n_r + n_r / 2);
    ModalRun out;
    out.local_patches = {center, left, right};
    const std::vector<CovarianceMatrix> refs{pipe.local[center], pipe.local[left], pipe.local[right]};
    for (int q : truncation_sweep(set.order)) {
        const TruncationResult tr = truncated_reconstruction(set, q, pipe.rmed, out.local_patches, refs);
        const double reff = tr.rmed_q.frobenius() > 0.0 ? effective_rank(tr.rmed_q) : 0.0;
        out.rows.push_back(ModalRow{q, tr.global_closure, tr.local_closure[0], tr.local_closure[1],
                                    tr.local_closure[2], reff, energy[q - 1]});
    }
    const ModalRow& last = out.rows.back();
    int violations = 0;
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        const auto worse = [](double now, double before) { return now > before * (1.0 + 1e-9) + 1e-15; };
        const ModalRow &a = out.rows[i - 1], &b = out.rows[i];
        violations += worse(b.global_closure, a.global_closure) + worse(b.local_center, a.local_center) +
                      worse(b.local_left, a.local_left) + worse(b.local_right, a.local_right);
    }
    const double reff_direct = effective_rank(pipe.rmed);
    const double reff_kl = kl_effective_rank_med(set.lambdas, set.components);
    StageReport& r = out.report;
    r = StageReport{"modal", {}, config_hash(config), config.mc.seed};
    r.metrics.push_back(informational("max_q", set.order));
    r.metrics.push_back(at_most("global_closure_full", last.global_closure, t.closure));
    r.metrics.push_back(at_most("local_closure_center_full", last.local_center, t.closure));
    r.metrics.push_back(at_most("local_closure_left_full", last.local_left, t.closure));
    r.metrics.push_back(at_most("local_closure_right_full", last.local_right, t.closure));
    r.metrics.push_back(at_most("closure_monotone_violations", violations, 0.0));
    r.metrics.push_back(at_most("kl_reff_gap", std::abs(reff_kl - reff_direct), t.kl_reff_gap));
    r.metrics.push_back(informational("r_eff_rmed", reff_direct));
    r.metrics.push_back(informational("r_eff_truncation_gap_full", std::abs(last.r_eff_q - reff_direct)));
    r.metrics.push_back(informational("modes_for_99pct_energy", modes_for_energy(energy, 0.99)));
    return out;
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_EXPERIMENT_HPP
