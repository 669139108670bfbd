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
#include "polos/csv.hpp"
#include "polos/measurement.hpp"
#include "polos/montecarlo.hpp"
#include "polos/polarization.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polos::cli
{
    // Exit codes
    inline constexpr int exit_ok = 0;
    inline constexpr int exit_config_error = 2;
    inline constexpr int exit_runtime_error = 1;

    // A configuration problem attributable to one flag
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(const std::string &flag, const std::string &what) : std::runtime_error(flag + ": " + what) {}
    };

    struct ExperimentFlags
    {
        std::uint64_t trials = 20000;
        std::uint64_t seed = 1;
        double power_db = -100.0;
        std::string material = "random";
        std::string materials_file;
        std::string weighting = "nvp";
        std::string diversity = "full";
        bool phaseu = false;
        int phaseu_samples = 25;
        int tones = 1;
        double scatter_var = 0.0;
        double prior = 0.5;
        double xi_min = 1e-6;
        double xi_max = 1e1;
        int xi_count = 60;
        unsigned workers = 0;
        double variance_perturbation = 0.0;
        std::string out;
        std::vector<double> values;
        std::string config_file;
    };

    inline void add_experiment_flags(CLI::App *app, ExperimentFlags &f, bool with_values)
    {
        app->add_option("--config", f.config_file, "key=value file with the same keys as the flags; flags take precedence");
        app->add_option("--trials", f.trials, "Number of Monte Carlo trials")->capture_default_str();
        app->add_option("--seed", f.seed, "Random seed")->capture_default_str();
        app->add_option("--power-db", f.power_db, "Path power gain P [dB]")->capture_default_str();
        app->add_option("--material", f.material, "Reflector name, or 'random' to draw from the table")->capture_default_str();
        app->add_option("--materials-file", f.materials_file, "Extra materials, one 'name,eps_r,kappa' per line");
        app->add_option("--weighting", f.weighting, "equ | mnv | nvp | all")->capture_default_str();
        app->add_option("--diversity", f.diversity, "full | tx | rx | all")->capture_default_str();
        app->add_flag("--phaseu", f.phaseu, "Also evaluate the phase-variance baseline");
        app->add_option("--phaseu-samples", f.phaseu_samples, "Samples per tone for the baseline")->capture_default_str();
        app->add_option("--tones", f.tones, "Number of tones F")->capture_default_str();
        app->add_option("--scatter-var", f.scatter_var, "NLOS scattering phase-noise power [rad^2]")->capture_default_str();
        app->add_option("--prior", f.prior, "Pr(NLOS)")->capture_default_str();
        app->add_option("--xi-min", f.xi_min, "Smallest threshold of the search grid [rad^2]")->capture_default_str();
        app->add_option("--xi-max", f.xi_max, "Largest threshold of the search grid [rad^2]")->capture_default_str();
        app->add_option("--xi-count", f.xi_count, "Number of log-spaced grid points")->capture_default_str();
        app->add_option("--workers", f.workers, "Worker threads (0: all cores)")->capture_default_str();
        app->add_option("--variance-perturbation", f.variance_perturbation,
                        "Log-normal sigma applied to the variance estimates used for weighting")
            ->capture_default_str();
        app->add_option("--out", f.out, "CSV destination (standard output when omitted)");
        if (with_values)
            app->add_option("--values", f.values, "Comma-separated axis values")->delimiter(',');
    }

    // Applies "key=value" lines (keys as the long flag names, with or without the dashes) to
    // options that were not given on the command line. '#', ';' and '[section]' lines are skipped.
    inline void apply_config_file(CLI::App *app, const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("--config", "cannot open '" + path + "'");
        std::string line;
        int line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            const std::string t = detail::trim(line);
            if (t.empty() || t.front() == '#' || t.front() == ';' || t.front() == '[')
                continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--config", "line " + std::to_string(line_no) + ": expected key=value");
            std::string key = detail::trim(t.substr(0, eq));
            std::string value = detail::trim(t.substr(eq + 1));
            if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
                value = value.substr(1, value.size() - 2);
            if (key.rfind("--", 0) == 0)
                key.erase(0, 2);
            if (key.empty() || key == "config")
                throw ConfigError("--config", "line " + std::to_string(line_no) + ": invalid key '" + key + "'");

            CLI::Option *opt = nullptr;
            try
            {
                opt = app->get_option("--" + key);
            }
            catch (const CLI::OptionNotFound &)
            {
                throw ConfigError("--config", "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
            if (opt->count() > 0)
                continue;
            try
            {
                opt->add_result(value);
                opt->run_callback();
            }
            catch (const CLI::Error &e)
            {
                throw ConfigError("--config", "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    inline std::vector<Weighting> parse_weightings(const std::string &s)
    {
        if (s == "equ")
            return {Weighting::equ};
        if (s == "mnv")
            return {Weighting::mnv};
        if (s == "nvp")
            return {Weighting::nvp};
        if (s == "all")
            return {Weighting::equ, Weighting::mnv, Weighting::nvp};
        throw ConfigError("--weighting", "expected equ, mnv, nvp or all, got '" + s + "'");
    }

    inline std::vector<Diversity> parse_diversities(const std::string &s)
    {
        if (s == "full")
            return {Diversity::full};
        if (s == "tx")
            return {Diversity::transmit};
        if (s == "rx")
            return {Diversity::receive};
        if (s == "all")
            return {Diversity::full, Diversity::transmit, Diversity::receive};
        throw ConfigError("--diversity", "expected full, tx, rx or all, got '" + s + "'");
    }

    inline std::vector<Material> material_table(const std::string &materials_file)
    {
        if (materials_file.empty())
            return builtin_materials();
        try
        {
            return merge_materials(builtin_materials(), load_materials_file(materials_file));
        }
        catch (const std::runtime_error &e)
        {
            throw ConfigError("--materials-file", e.what());
        }
    }

    inline ExperimentConfig to_config(const ExperimentFlags &f)
    {
        ExperimentConfig cfg;
        if (f.trials < 1)
            throw ConfigError("--trials", "must be >= 1");
        cfg.num_trials = f.trials;
        cfg.seed = f.seed;
        if (!std::isfinite(f.power_db))
            throw ConfigError("--power-db", "must be finite");
        cfg.power_db = f.power_db;

        cfg.materials = material_table(f.materials_file);
        if (f.material != "random")
        {
            const auto m = find_material(cfg.materials, f.material);
            if (!m)
                throw ConfigError("--material", "unknown material '" + f.material + "'");
            cfg.material = m->name;
        }

        cfg.variants.clear();
        for (auto d : parse_diversities(f.diversity))
            for (auto w : parse_weightings(f.weighting))
                cfg.variants.push_back(Variant::proposed(w, d));
        if (f.phaseu)
            cfg.variants.push_back(Variant::phase_variance());

        if (f.phaseu_samples < 2)
            throw ConfigError("--phaseu-samples", "must be >= 2");
        cfg.phaseu_samples = f.phaseu_samples;
        if (f.tones < 1)
            throw ConfigError("--tones", "must be >= 1");
        cfg.radio.num_tones = f.tones;
        if (!(f.scatter_var >= 0.0))
            throw ConfigError("--scatter-var", "must be >= 0");
        cfg.scatter_var = f.scatter_var;
        if (!(f.prior > 0.0 && f.prior < 1.0))
            throw ConfigError("--prior", "must lie in (0, 1)");
        cfg.prior_nlos = f.prior;
        if (!(f.xi_min > 0.0))
            throw ConfigError("--xi-min", "must be positive");
        if (!(f.xi_max >= f.xi_min))
            throw ConfigError("--xi-max", "must be >= --xi-min");
        if (f.xi_count < 1)
            throw ConfigError("--xi-count", "must be >= 1");
        cfg.xi_grid = {f.xi_min, f.xi_max, f.xi_count};
        cfg.workers = f.workers;
        if (!(f.variance_perturbation >= 0.0))
            throw ConfigError("--variance-perturbation", "must be >= 0");
        cfg.variance_log_sigma = f.variance_perturbation;
        return cfg;
    }

    inline std::vector<double> default_axis_values(SweepAxis axis)
    {
        switch (axis)
        {
        case SweepAxis::threshold:
            return {};
        case SweepAxis::power:
        {
            std::vector<double> v;
            for (int p = -140; p <= -70; p += 5)
                v.push_back(p);
            return v;
        }
        case SweepAxis::scatter:
            return {1e-4, 1e-3, 1e-2, 1e-1};
        case SweepAxis::tones:
            return {1, 2, 4, 8};
        }
        return {};
    }

    inline void print_summary(const std::vector<SweepRow> &rows, SweepAxis axis, std::ostream &os)
    {
        if (axis == SweepAxis::threshold)
        {
            std::map<std::string, const SweepRow *> seen;
            for (const auto &r : rows)
                if (!seen.count(r.variant))
                {
                    seen[r.variant] = &r;
                    os << r.variant << ": AER_opt=" << format_real(r.aer_opt) << " xi_opt=" << format_real(r.xi_opt)
                       << " (n=" << r.n_trials << ", degenerate resample rate " << format_real(r.resample_rate) << ")\n";
                }
            return;
        }
        for (const auto &r : rows)
            os << to_string(axis) << '=' << format_real(r.axis) << ' ' << r.variant << ": AER_opt=" << format_real(r.aer_opt)
               << " xi_opt=" << format_real(r.xi_opt) << '\n';
    }

    inline int run_sweep(const ExperimentFlags &f, SweepAxis axis, std::ostream &out, std::ostream &err)
    {
        ExperimentConfig cfg = to_config(f);
        std::vector<double> values = f.values.empty() ? default_axis_values(axis) : f.values;
        if (axis == SweepAxis::tones)
            for (double v : values)
                if (v < 1.0 || v != std::floor(v))
                    throw ConfigError("--values", "tone counts must be positive integers");
        if (axis == SweepAxis::scatter)
            for (double v : values)
                if (!(v >= 0.0))
                    throw ConfigError("--values", "scatter variances must be >= 0");
        if (axis == SweepAxis::threshold)
            for (double v : values)
                if (!(v > 0.0))
                    throw ConfigError("--values", "thresholds must be positive");

        const auto rows = sweep(cfg, axis, values);
        emit_csv(rows, f.out, out);
        print_summary(rows, axis, f.out.empty() ? err : out);
        return exit_ok;
    }

    // ---- single decision from JSON ------------------------------------------------------

    inline Truth parse_truth(const std::string &s)
    {
        const std::string l = detail::lower(s);
        if (l == "los")
            return Truth::los;
        if (l == "nlos")
            return Truth::nlos;
        throw ConfigError("--json", "truth must be LOS or NLOS, got '" + s + "'");
    }

    inline EulerAngles parse_euler(const nlohmann::json &j)
    {
        if (!j.is_array() || j.size() != 3)
            throw ConfigError("--json", "rotation must be [beta_x, beta_y, beta_z]");
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    }

    inline DirectionAngles parse_direction(const nlohmann::json &j)
    {
        if (!j.is_array() || j.size() != 2)
            throw ConfigError("--json", "direction must be [azimuth, elevation]");
        return {j[0].get<double>(), j[1].get<double>()};
    }

    // {"measurements": [{"VV": {"phase": .., "variance": ..}, ...}, ...]}  one object per tone, or
    // {"scenario": {...}} to synthesize the measurements. Optional: xi, weighting, diversity, truth, seed.
    inline DecisionRecord classify_json(const nlohmann::json &doc, const std::vector<Material> &materials)
    {
        const double xi = doc.value("xi", 2e-3);
        if (!(xi > 0.0))
            throw ConfigError("--json", "xi must be positive");
        const auto weighting = parse_weightings(doc.value("weighting", std::string("nvp")));
        const auto diversity = parse_diversities(doc.value("diversity", std::string("full")));
        if (weighting.size() != 1 || diversity.size() != 1)
            throw ConfigError("--json", "classify-one takes a single weighting and diversity");

        std::optional<Truth> truth;
        if (doc.contains("truth"))
            truth = parse_truth(doc["truth"].get<std::string>());

        PhaseMeasurementSet set;
        if (doc.contains("measurements"))
        {
            const auto &tones = doc["measurements"];
            if (!tones.is_array() || tones.empty())
                throw ConfigError("--json", "measurements must be a non-empty array of tones");
            std::vector<PhaseMeasurementSet::Tone> data;
            for (const auto &tone : tones)
            {
                PhaseMeasurementSet::Tone t{};
                for (const auto &c : all_configs)
                {
                    const std::string key(config_names[c.index()]);
                    if (!tone.contains(key))
                    {
                        if (config_active(diversity[0], c))
                            throw ConfigError("--json", "missing measurement " + key);
                        t[c.index()].variance = 1.0;
                        continue;
                    }
                    const auto &m = tone[key];
                    const double phase = m.at("phase").get<double>();
                    const double var = m.at("variance").get<double>();
                    if (!(var > 0.0))
                        throw ConfigError("--json", key + ".variance must be positive");
                    t[c.index()].phase = BinaryAngle::from_radians(phase);
                    t[c.index()].variance = var;
                }
                data.push_back(t);
            }
            set = PhaseMeasurementSet(std::move(data), diversity[0]);
        }
        else if (doc.contains("scenario"))
        {
            const auto &js = doc["scenario"];
            Scenario s;
            s.truth = parse_truth(js.value("truth", std::string("LOS")));
            s.path_gain = std::pow(10.0, js.value("power_db", -100.0) / 10.0);
            s.distance = js.value("distance", 10.0);
            s.clock_offset = js.value("clock_offset", 0.0);
            s.incidence = js.value("incidence", 0.0);
            s.scatter_var = js.value("scatter_var", 0.0);
            if (js.contains("ue_rotation"))
                s.ue_rotation = parse_euler(js["ue_rotation"]);
            if (js.contains("reflector_rotation"))
                s.reflector_rotation = parse_euler(js["reflector_rotation"]);
            if (js.contains("departure"))
                s.departure = parse_direction(js["departure"]);
            if (js.contains("arrival"))
                s.arrival = parse_direction(js["arrival"]);
            const std::string name = js.value("material", std::string("glass"));
            const auto m = find_material(materials, name);
            if (!m)
                throw ConfigError("--json", "unknown material '" + name + "'");
            s.material = *m;
            if (!truth)
                truth = s.truth;

            RadioParams radio;
            radio.num_tones = js.value("tones", 1);
            auto rng = trial_rng(doc.value("seed", std::uint64_t(1)), 0);
            try
            {
                set = measurement_set(s, radio, diversity[0], rng);
            }
            catch (const std::invalid_argument &e)
            {
                throw ConfigError("--json", e.what());
            }
        }
        else
            throw ConfigError("--json", "expected a 'measurements' or 'scenario' object");

        const auto pair_var = pairwise_variances(set);
        const WeightVector W = make_weights(weighting[0], diversity[0], set.num_tones(), pair_var);
        return decide(set, W, xi, truth);
    }

    inline constexpr const char *decision_csv_header = "statistic,argmin,decision,xi,truth";

    inline std::string decision_csv_row(const DecisionRecord &r)
    {
        return format_real(r.statistic) + ',' + std::to_string(r.argmin) + ',' + std::string(to_string(r.decision)) + ',' +
               format_real(r.xi) + ',' + (r.truth ? std::string(to_string(*r.truth)) : std::string());
    }

    // ---- entry point ---------------------------------------------------------------------

    inline int parse_and_run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Polarization-diversity LOS/NLOS identification from carrier phase measurements", "polos"};
        app.require_subcommand(1, 1);

        ExperimentFlags thr, pow, sca, ton;
        struct
        {
            SweepAxis axis;
            ExperimentFlags *flags;
            CLI::App *cmd;
        } sweeps[] = {
            {SweepAxis::threshold, &thr,
             app.add_subcommand("sweep-threshold", "Error rates as a function of the decision threshold")},
            {SweepAxis::power, &pow, app.add_subcommand("sweep-power", "Optimum error rate versus path power gain [dB]")},
            {SweepAxis::scatter, &sca,
             app.add_subcommand("sweep-scatter", "Optimum error rate versus NLOS scattering noise power [rad^2]")},
            {SweepAxis::tones, &ton, app.add_subcommand("sweep-tones", "Optimum error rate versus number of tones")},
        };
        for (auto &s : sweeps)
            add_experiment_flags(s.cmd, *s.flags, true);

        std::string json_text, json_file, classify_materials;
        double classify_xi = -1.0;
        bool header = false;
        auto *classify = app.add_subcommand("classify-one", "Classify a single link; prints one CSV row");
        auto *json_opt = classify->add_option("--json", json_text, "Scenario or measurements as a JSON object");
        classify->add_option("--json-file", json_file, "Read the JSON object from a file")->excludes(json_opt);
        classify->add_option("--xi", classify_xi, "Decision threshold [rad^2]; overrides the JSON value");
        classify->add_option("--materials-file", classify_materials, "Extra materials file");
        classify->add_flag("--header", header, "Print the column names first");

        std::string list_materials_file;
        auto *materials = app.add_subcommand("materials", "List the reflector materials");
        materials->add_option("--materials-file", list_materials_file, "Extra materials file");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &e)
        {
            return app.exit(e, out, err);
        }
        catch (const CLI::CallForAllHelp &e)
        {
            return app.exit(e, out, err);
        }
        catch (const CLI::ParseError &e)
        {
            app.exit(e, out, err);
            return exit_config_error;
        }

        try
        {
            for (auto &s : sweeps)
                if (s.cmd->parsed())
                {
                    if (!s.flags->config_file.empty())
                        apply_config_file(s.cmd, s.flags->config_file);
                    return run_sweep(*s.flags, s.axis, out, err);
                }

            if (materials->parsed())
            {
                out << "name,eps_r,kappa\n";
                for (const auto &m : material_table(list_materials_file))
                    out << m.name << ',' << format_real(m.eps_r) << ',' << format_real(m.kappa) << '\n';
                return exit_ok;
            }

            if (classify->parsed())
            {
                if (!json_file.empty())
                {
                    std::ifstream f(json_file);
                    if (!f)
                        throw ConfigError("--json-file", "cannot open '" + json_file + "'");
                    json_text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
                }
                if (json_text.empty())
                    throw ConfigError("--json", "a JSON object is required");
                nlohmann::json doc;
                try
                {
                    doc = nlohmann::json::parse(json_text);
                }
                catch (const nlohmann::json::exception &e)
                {
                    throw ConfigError("--json", e.what());
                }
                if (classify_xi > 0.0)
                    doc["xi"] = classify_xi;
                DecisionRecord r;
                try
                {
                    r = classify_json(doc, material_table(classify_materials));
                }
                catch (const nlohmann::json::exception &e)
                {
                    throw ConfigError("--json", e.what());
                }
                if (header)
                    out << decision_csv_header << '\n';
                out << decision_csv_row(r) << '\n';
                return exit_ok;
            }
        }
        catch (const ConfigError &e)
        {
            err << "error: " << e.what() << '\n';
            return exit_config_error;
        }
        catch (const std::invalid_argument &e)
        {
            err << "error: " << e.what() << '\n';
            return exit_config_error;
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
            return exit_runtime_error;
        }
        return exit_config_error;
    }
}
