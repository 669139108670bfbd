// SPDX-License-Identifier: Apache-2.0
//
// polos - polarization-diversity LOS/NLOS link identification
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "polos/classifier.hpp"
#include "polos/measurement.hpp"
#include "polos/polarization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace polos
{
    inline constexpr int max_scenario_resamples = 100;

    class DegenerateScenarioExhausted : public std::runtime_error
    {
    public:
        explicit DegenerateScenarioExhausted(std::uint64_t trial)
            : std::runtime_error("trial " + std::to_string(trial) + ": no non-degenerate geometry after " +
                                 std::to_string(max_scenario_resamples) + " resamples")
        {
        }
    };

    class MissingClass : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Log-spaced threshold grid [rad^2]
    struct XiGrid
    {
        double min = 1e-6;
        double max = 1e1;
        int count = 60;

        std::vector<double> points() const
        {
            if (!(min > 0.0 && max >= min) || count < 1)
                throw std::invalid_argument("xi grid: need 0 < min <= max and count >= 1");
            if (count == 1)
                return {min};
            std::vector<double> out(static_cast<std::size_t>(count));
            const double a = std::log10(min), b = std::log10(max);
            for (int k = 0; k < count; ++k)
                out[k] = std::pow(10.0, a + (b - a) * k / (count - 1));
            return out;
        }
    };

    // A classifier variant evaluated per trial
    struct Variant
    {
        enum class Kind
        {
            proposed,
            phaseu
        };

        Kind kind = Kind::proposed;
        Weighting weighting = Weighting::nvp;
        Diversity diversity = Diversity::full;

        static Variant proposed(Weighting w, Diversity d) { return {Kind::proposed, w, d}; }
        static Variant phase_variance() { return {Kind::phaseu, Weighting::equ, Diversity::full}; }

        std::string name() const
        {
            if (kind == Kind::phaseu)
                return "phaseu";
            return std::string(to_string(weighting)) + "-" + std::string(to_string(diversity));
        }

        friend bool operator==(const Variant &, const Variant &) = default;
    };

    struct ExperimentConfig
    {
        std::uint64_t num_trials = 20000;
        std::uint64_t seed = 1;
        double prior_nlos = 0.5;                  // Pr(H1)
        double power_db = -100.0;                 // path power gain P [dB]
        std::optional<std::string> material;      // fixed reflector; random from the table when empty
        std::vector<Material> materials = builtin_materials();
        std::vector<Variant> variants{Variant::proposed(Weighting::nvp, Diversity::full)};
        RadioParams radio;
        double scatter_var = 0.0;                 // NLOS scattering phase-noise power [rad^2]
        XiGrid xi_grid;
        unsigned workers = 0;                     // 0: hardware concurrency
        int phaseu_samples = 25;
        double distance = 10.0;                   // [m]
        bool noiseless = false;
        double variance_log_sigma = 0.0;          // log-normal perturbation of the variance estimates
        std::optional<Truth> force_truth;         // single-hypothesis runs

        double path_gain() const { return std::pow(10.0, power_db / 10.0); }

        void validate() const
        {
            if (num_trials < 1)
                throw std::invalid_argument("num_trials must be >= 1");
            if (!(prior_nlos > 0.0 && prior_nlos < 1.0))
                throw std::invalid_argument("prior must lie in (0, 1)");
            if (!std::isfinite(power_db))
                throw std::invalid_argument("power must be finite");
            if (materials.empty())
                throw std::invalid_argument("material table is empty");
            if (material && !find_material(materials, *material))
                throw std::invalid_argument("unknown material '" + *material + "'");
            if (variants.empty())
                throw std::invalid_argument("no classifier variant requested");
            if (!(scatter_var >= 0.0))
                throw std::invalid_argument("scatter variance must be >= 0");
            if (phaseu_samples < 2)
                throw std::invalid_argument("phaseu samples must be >= 2");
            if (!(distance > 0.0))
                throw std::invalid_argument("distance must be positive");
            if (!(variance_log_sigma >= 0.0))
                throw std::invalid_argument("variance perturbation must be >= 0");
            radio.validate();
            (void)xi_grid.points();
        }
    };

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Independent stream per (seed, trial)
    inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial)
    {
        return std::mt19937_64(splitmix64(seed ^ splitmix64(trial + 0x5851f42d4c957f2dULL)));
    }

    // Draws every field regardless of hypothesis or material policy, so that trials with the same
    // index stay paired across configurations. Degenerate geometries are redrawn.
    template <class Rng>
    Scenario sample_scenario(const ExperimentConfig &cfg, std::uint64_t trial, Rng &rng, int *resamples = nullptr)
    {
        constexpr double pi = std::numbers::pi;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

        Scenario s;
        const double u_truth = unit(rng);
        s.truth = cfg.force_truth ? *cfg.force_truth : (u_truth < cfg.prior_nlos ? Truth::nlos : Truth::los);

        const double u_material = unit(rng);
        if (cfg.material)
            s.material = *find_material(cfg.materials, *cfg.material);
        else
        {
            const auto n = cfg.materials.size();
            s.material = cfg.materials[std::min(n - 1, static_cast<std::size_t>(u_material * double(n)))];
        }

        s.path_gain = cfg.path_gain();
        s.distance = cfg.distance;
        s.scatter_var = cfg.scatter_var;

        for (int attempt = 0; attempt <= max_scenario_resamples; ++attempt)
        {
            s.clock_offset = uniform(0.0, 2.0 * pi);
            s.incidence = uniform(0.0, pi / 2);
            s.ue_rotation = {uniform(-pi, pi), uniform(-pi, pi), uniform(-pi, pi)};
            s.reflector_rotation = {uniform(-pi, pi), uniform(-pi, pi), uniform(-pi, pi)};
            s.departure.azimuth = uniform(-pi, pi);
            s.arrival.azimuth = uniform(-pi, pi);
            s.departure.elevation = uniform(-pi / 2, pi / 2);
            s.arrival.elevation = uniform(-pi / 2, pi / 2);
            try
            {
                (void)link_geometry(s);
                return s;
            }
            catch (const DegenerateProjection &)
            {
                if (resamples)
                    ++*resamples;
            }
        }
        throw DegenerateScenarioExhausted(trial);
    }

    struct TrialResult
    {
        Truth truth = Truth::los;
        std::vector<double> stats; // one per variant
        int resamples = 0;
    };

    // One trial: all variants see the same scenario and the same measurement noise
    inline TrialResult run_trial(const ExperimentConfig &cfg, std::uint64_t trial)
    {
        auto rng = trial_rng(cfg.seed, trial);
        TrialResult out;
        const Scenario s = sample_scenario(cfg, trial, rng, &out.resamples);
        out.truth = s.truth;

        const MeasurementOptions opt{cfg.noiseless};
        PhaseMeasurementSet full = measurement_set(s, cfg.radio, Diversity::full, rng, opt);

        if (cfg.variance_log_sigma > 0.0)
        {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (int f = 0; f < full.num_tones(); ++f)
                for (int k = 0; k < 4; ++k)
                    full.at(f, k).variance *= std::exp(cfg.variance_log_sigma * normal(rng));
        }

        std::optional<PhaseSeries> series;
        out.stats.reserve(cfg.variants.size());
        for (const auto &v : cfg.variants)
        {
            if (v.kind == Variant::Kind::phaseu)
            {
                if (!series)
                    series = phase_series(s, cfg.radio, cfg.phaseu_samples, rng, opt);
                out.stats.push_back(phaseu_statistic(series->samples, series->variances));
                continue;
            }
            const PhaseMeasurementSet view = full.with_diversity(v.diversity);
            const auto pair_var = pairwise_variances(view);
            const WeightVector W = make_weights(v.weighting, v.diversity, view.num_tones(), pair_var);
            out.stats.push_back(decision_statistic(view, W).value);
        }
        return out;
    }

    // Per-trial statistics, stored once so that any threshold can be applied afterwards
    struct TrialTable
    {
        std::vector<Variant> variants;
        std::vector<Truth> truths;
        std::vector<std::vector<double>> stats; // [variant][trial]
        std::uint64_t resamples = 0;

        std::size_t num_trials() const { return truths.size(); }

        std::span<const double> statistics(const Variant &v) const
        {
            for (std::size_t k = 0; k < variants.size(); ++k)
                if (variants[k] == v)
                    return stats[k];
            throw std::invalid_argument("variant '" + v.name() + "' was not simulated");
        }

        double resample_rate() const { return truths.empty() ? 0.0 : double(resamples) / double(truths.size()); }
    };

    inline unsigned resolve_workers(unsigned requested)
    {
        if (requested > 0)
            return requested;
        return std::max(1u, std::thread::hardware_concurrency());
    }

    // Deterministic for a given seed whatever the worker count: every trial owns its random
    // stream and writes into its own slot.
    inline TrialTable run_trials(const ExperimentConfig &cfg)
    {
        cfg.validate();
        const std::uint64_t n = cfg.num_trials;

        TrialTable table;
        table.variants = cfg.variants;
        table.truths.assign(n, Truth::los);
        table.stats.assign(cfg.variants.size(), std::vector<double>(n, 0.0));

        const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(cfg.workers), n));
        std::vector<std::uint64_t> resamples(workers, 0);
        std::vector<std::exception_ptr> errors(workers);

        auto work = [&](unsigned w) {
            try
            {
                for (std::uint64_t t = w; t < n; t += workers)
                {
                    TrialResult r = run_trial(cfg, t);
                    table.truths[t] = r.truth;
                    for (std::size_t k = 0; k < r.stats.size(); ++k)
                        table.stats[k][t] = r.stats[k];
                    resamples[w] += static_cast<std::uint64_t>(r.resamples);
                }
            }
            catch (...)
            {
                errors[w] = std::current_exception();
            }
        };

        if (workers == 1)
            work(0);
        else
        {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back(work, w);
        }

        for (const auto &e : errors)
            if (e)
                std::rethrow_exception(e);
        for (auto r : resamples)
            table.resamples += r;
        return table;
    }

    // LOS-referenced error rates at one threshold
    struct MetricsPoint
    {
        double xi = 0.0;
        double pmd = 0.0;    // Pr(declare NLOS | LOS)
        double pfa = 0.0;    // Pr(declare LOS | NLOS)
        double aer = 0.0;    // prior-weighted average error rate
        std::uint64_t n_los = 0;
        std::uint64_t n_nlos = 0;
        std::uint64_t misses = 0;
        std::uint64_t false_alarms = 0;

        double pmd_stderr() const { return std::sqrt(pmd * (1.0 - pmd) / double(n_los)); }
        double pfa_stderr() const { return std::sqrt(pfa * (1.0 - pfa) / double(n_nlos)); }
    };

    inline MetricsPoint metrics(std::span<const double> stats, std::span<const Truth> truths, double xi,
                                double prior_nlos = 0.5)
    {
        if (stats.size() != truths.size())
            throw std::invalid_argument("metrics: statistics and truths differ in length");
        MetricsPoint p;
        p.xi = xi;
        for (std::size_t k = 0; k < stats.size(); ++k)
        {
            if (truths[k] == Truth::los)
            {
                ++p.n_los;
                p.misses += stats[k] > xi ? 1 : 0;
            }
            else
            {
                ++p.n_nlos;
                p.false_alarms += stats[k] <= xi ? 1 : 0;
            }
        }
        if (p.n_los == 0 || p.n_nlos == 0)
            throw MissingClass("metrics: both LOS and NLOS trials are required");
        p.pmd = double(p.misses) / double(p.n_los);
        p.pfa = double(p.false_alarms) / double(p.n_nlos);
        p.aer = p.pmd * (1.0 - prior_nlos) + p.pfa * prior_nlos;
        return p;
    }

    struct ThresholdOptimum
    {
        double xi = 0.0;
        double aer = 0.0;
        MetricsPoint point;
    };

    // Brute-force search over the grid; ties go to the larger threshold
    inline ThresholdOptimum optimize_threshold(std::span<const double> stats, std::span<const Truth> truths,
                                               std::span<const double> grid, double prior_nlos = 0.5)
    {
        if (grid.empty())
            throw std::invalid_argument("optimize_threshold: empty grid");
        std::vector<double> sorted(grid.begin(), grid.end());
        std::sort(sorted.begin(), sorted.end());

        ThresholdOptimum best;
        bool first = true;
        for (double xi : sorted)
        {
            const MetricsPoint p = metrics(stats, truths, xi, prior_nlos);
            if (first || p.aer <= best.aer)
            {
                best = {xi, p.aer, p};
                first = false;
            }
        }
        return best;
    }

    enum class SweepAxis
    {
        threshold,
        power,
        scatter,
        tones
    };

    inline std::string_view to_string(SweepAxis a)
    {
        switch (a)
        {
        case SweepAxis::threshold:
            return "xi";
        case SweepAxis::power:
            return "power_db";
        case SweepAxis::scatter:
            return "scatter_var";
        case SweepAxis::tones:
            return "tones";
        }
        return "?";
    }

    struct SweepRow
    {
        double axis = 0.0;
        std::string variant;
        double pmd = 0.0;
        double pfa = 0.0;
        double aer = 0.0;
        double xi_opt = 0.0;
        double aer_opt = 0.0;
        std::uint64_t n_trials = 0;
        std::uint64_t seed = 0;
        double resample_rate = 0.0;
    };

    inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double value)
    {
        switch (axis)
        {
        case SweepAxis::threshold:
            break;
        case SweepAxis::power:
            cfg.power_db = value;
            break;
        case SweepAxis::scatter:
            cfg.scatter_var = value;
            break;
        case SweepAxis::tones:
            if (value < 1.0 || value != std::floor(value))
                throw std::invalid_argument("tone count must be a positive integer");
            cfg.radio.num_tones = static_cast<int>(value);
            break;
        }
        return cfg;
    }

    // One row per axis point and variant. The threshold axis re-uses a single simulation and
    // reports the rates at each grid value; the other axes report the rates at the optimum
    // threshold. Every axis point re-uses the same seed, so points are paired.
    inline std::vector<SweepRow> sweep(const ExperimentConfig &cfg, SweepAxis axis, std::vector<double> values = {})
    {
        const auto grid = cfg.xi_grid.points();
        if (axis == SweepAxis::threshold && values.empty())
            values = grid;
        if (values.empty())
            throw std::invalid_argument("sweep: no axis values");

        std::vector<SweepRow> rows;
        if (axis == SweepAxis::threshold)
        {
            const TrialTable t = run_trials(cfg);
            for (std::size_t k = 0; k < t.variants.size(); ++k)
            {
                const auto opt = optimize_threshold(t.stats[k], t.truths, grid, cfg.prior_nlos);
                for (double xi : values)
                {
                    const auto p = metrics(t.stats[k], t.truths, xi, cfg.prior_nlos);
                    rows.push_back({xi, t.variants[k].name(), p.pmd, p.pfa, p.aer, opt.xi, opt.aer, t.num_trials(), cfg.seed,
                                    t.resample_rate()});
                }
            }
            return rows;
        }

        for (double value : values)
        {
            const TrialTable t = run_trials(with_axis_value(cfg, axis, value));
            for (std::size_t k = 0; k < t.variants.size(); ++k)
            {
                const auto opt = optimize_threshold(t.stats[k], t.truths, grid, cfg.prior_nlos);
                rows.push_back({value, t.variants[k].name(), opt.point.pmd, opt.point.pfa, opt.point.aer, opt.xi, opt.aer,
                                t.num_trials(), cfg.seed, t.resample_rate()});
            }
        }
        return rows;
    }
}
