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

#include "polos/measurement.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

namespace polos
{
    inline constexpr int num_differentials = 6;

    // Configuration pairs (a, b) of the differentials phi_a - phi_b, in config index order
    // VV-VH, VV-HV, VV-HH, VH-HV, VH-HH, HV-HH
    inline constexpr std::array<std::pair<int, int>, num_differentials> differential_pairs{
        std::pair{0, 1}, std::pair{0, 2}, std::pair{0, 3}, std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}};

    using NuVector = std::array<std::uint8_t, num_differentials>;

    // Most-significant-bit-first 6-bit expansion of i
    inline NuVector nu_vector(int i)
    {
        if (i < 0 || i > 63)
            throw std::out_of_range("nu_vector: index must be in [0, 63]");
        NuVector v{};
        for (int j = 0; j < num_differentials; ++j)
            v[j] = static_cast<std::uint8_t>((i >> (num_differentials - 1 - j)) & 1);
        return v;
    }

    // The pi-offset patterns reachable when every configuration phase is 0 or pi
    inline constexpr std::array<int, 8> restricted_nu_set() { return {0, 11, 21, 30, 38, 45, 51, 56}; }

    inline constexpr bool differential_active(Diversity d, int j)
    {
        switch (d)
        {
        case Diversity::full:
            return true;
        case Diversity::transmit:
            return j == 5; // HV - HH
        case Diversity::receive:
            return j == 4; // VH - HH
        }
        return false;
    }

    inline constexpr int active_differentials(Diversity d) { return d == Diversity::full ? num_differentials : 1; }

    // Wrapped differentials of one tone for pattern i; entries in (-pi, pi], masked entries are 0
    inline std::array<double, num_differentials> differential_metric(const PhaseMeasurementSet &m, int tone, int i)
    {
        const NuVector nu = nu_vector(i);
        std::array<double, num_differentials> out{};
        for (int j = 0; j < num_differentials; ++j)
        {
            if (!differential_active(m.diversity(), j))
                continue;
            const auto [a, b] = differential_pairs[j];
            BinaryAngle d = m.at(tone, a).phase - m.at(tone, b).phase;
            if (nu[j])
                d = d + BinaryAngle(BinaryAngle::half_turn);
            out[j] = d.signed_radians();
        }
        return out;
    }

    // Diagonal of W, laid out tone-major: entry f * 6 + j
    struct WeightVector
    {
        std::vector<double> w;

        int num_tones() const { return static_cast<int>(w.size()) / num_differentials; }
        double operator()(int tone, int j) const { return w[static_cast<std::size_t>(tone * num_differentials + j)]; }

        double sum_of_squares() const
        {
            double s = 0.0;
            for (double x : w)
                s += x * x;
            return s;
        }
    };

    enum class Weighting
    {
        equ,
        mnv,
        nvp
    };

    inline std::string_view to_string(Weighting w)
    {
        switch (w)
        {
        case Weighting::equ:
            return "equ";
        case Weighting::mnv:
            return "mnv";
        case Weighting::nvp:
            return "nvp";
        }
        return "?";
    }

    // Pairwise variances sigma_a^2 + sigma_b^2, tone-major; inactive entries are 0
    inline std::vector<double> pairwise_variances(const PhaseMeasurementSet &m)
    {
        std::vector<double> out(static_cast<std::size_t>(m.num_tones() * num_differentials), 0.0);
        for (int f = 0; f < m.num_tones(); ++f)
            for (int j = 0; j < num_differentials; ++j)
            {
                if (!differential_active(m.diversity(), j))
                    continue;
                const auto [a, b] = differential_pairs[j];
                out[static_cast<std::size_t>(f * num_differentials + j)] = m.at(f, a).variance + m.at(f, b).variance;
            }
        return out;
    }

    inline WeightVector weights_equ(Diversity d, int num_tones)
    {
        if (num_tones < 1)
            throw std::invalid_argument("weights_equ: need at least one tone");
        const double w = 1.0 / std::sqrt(double(active_differentials(d) * num_tones));
        WeightVector out{std::vector<double>(static_cast<std::size_t>(num_tones * num_differentials), 0.0)};
        for (int f = 0; f < num_tones; ++f)
            for (int j = 0; j < num_differentials; ++j)
                if (differential_active(d, j))
                    out.w[static_cast<std::size_t>(f * num_differentials + j)] = w;
        return out;
    }

    namespace detail
    {
        inline void check_variances(Diversity d, std::span<const double> var)
        {
            if (var.empty() || var.size() % num_differentials != 0)
                throw std::invalid_argument("pairwise variances: size must be a positive multiple of 6");
            for (std::size_t k = 0; k < var.size(); ++k)
                if (differential_active(d, int(k % num_differentials)) && !(var[k] > 0.0 && std::isfinite(var[k])))
                    throw std::invalid_argument("pairwise variances must be positive and finite");
        }
    }

    // All weight on the active entry with the smallest pairwise variance (lowest tone, then lowest j on ties)
    inline WeightVector weights_mnv(Diversity d, std::span<const double> pair_var)
    {
        detail::check_variances(d, pair_var);
        WeightVector out{std::vector<double>(pair_var.size(), 0.0)};
        std::size_t best = pair_var.size();
        for (std::size_t k = 0; k < pair_var.size(); ++k)
        {
            if (!differential_active(d, int(k % num_differentials)))
                continue;
            if (best == pair_var.size() || pair_var[k] < pair_var[best])
                best = k;
        }
        out.w[best] = 1.0;
        return out;
    }

    // w_j = mu / sigma_j with mu = 1 / sqrt(sum_j sigma_j^-2) over the active entries
    inline WeightVector weights_nvp(Diversity d, std::span<const double> pair_var)
    {
        detail::check_variances(d, pair_var);
        double inv_sum = 0.0;
        for (std::size_t k = 0; k < pair_var.size(); ++k)
            if (differential_active(d, int(k % num_differentials)))
                inv_sum += 1.0 / pair_var[k];
        const double mu = 1.0 / std::sqrt(inv_sum);

        WeightVector out{std::vector<double>(pair_var.size(), 0.0)};
        for (std::size_t k = 0; k < pair_var.size(); ++k)
            if (differential_active(d, int(k % num_differentials)))
                out.w[k] = mu / std::sqrt(pair_var[k]);
        return out;
    }

    inline WeightVector make_weights(Weighting scheme, Diversity d, int num_tones, std::span<const double> pair_var)
    {
        switch (scheme)
        {
        case Weighting::equ:
            return weights_equ(d, num_tones);
        case Weighting::mnv:
            return weights_mnv(d, pair_var);
        case Weighting::nvp:
            return weights_nvp(d, pair_var);
        }
        throw std::invalid_argument("unknown weighting scheme");
    }

    struct Statistic
    {
        double value = 0.0; // min_i ||W delta_i||^2 [rad^2]
        int argmin = 0;     // nu index attaining the minimum
    };

    // Minimum over the restricted nu set of the weighted squared norm, stacked over tones with
    // the same pattern for every tone. Ties keep the lowest index.
    inline Statistic decision_statistic(const PhaseMeasurementSet &m, const WeightVector &W)
    {
        if (W.w.size() != static_cast<std::size_t>(m.num_tones() * num_differentials))
            throw std::invalid_argument("decision_statistic: weight vector does not match the tone count");

        Statistic best{std::numeric_limits<double>::infinity(), 0};
        for (int i : restricted_nu_set())
        {
            double s = 0.0;
            for (int f = 0; f < m.num_tones(); ++f)
            {
                const auto delta = differential_metric(m, f, i);
                for (int j = 0; j < num_differentials; ++j)
                {
                    const double wd = W(f, j) * delta[j];
                    s += wd * wd;
                }
            }
            if (s < best.value)
                best = {s, i};
        }
        return best;
    }

    struct DecisionRecord
    {
        double statistic = 0.0;
        int argmin = 0;
        Truth decision = Truth::los;
        double xi = 0.0;
        std::optional<Truth> truth;
    };

    inline DecisionRecord decide(const PhaseMeasurementSet &m, const WeightVector &W, double xi,
                                 std::optional<Truth> truth = std::nullopt)
    {
        if (!(xi > 0.0))
            throw std::invalid_argument("decide: threshold must be positive");
        const Statistic s = decision_statistic(m, W);
        return {s.value, s.argmin, s.value <= xi ? Truth::los : Truth::nlos, xi, truth};
    }

    // Sample variance (K - 1 normalization) of the residuals about the circular mean, wrapped to (-pi, pi]
    inline double circular_sample_variance(std::span<const double> phases)
    {
        if (phases.size() < 2)
            throw std::invalid_argument("circular_sample_variance: need at least two samples");
        double sc = 0.0, ss = 0.0;
        for (double p : phases)
        {
            sc += std::cos(p);
            ss += std::sin(p);
        }
        const double mean = std::atan2(ss, sc);
        double acc = 0.0;
        for (double p : phases)
        {
            const double r = std::remainder(p - mean, 2.0 * std::numbers::pi);
            acc += r * r;
        }
        return acc / double(phases.size() - 1);
    }

    // Phase-variance baseline: sum_f u_f var_f with u_f proportional to 1 / sigma_f^2
    inline double phaseu_statistic(const std::vector<std::vector<double>> &series, std::span<const double> variances)
    {
        if (series.empty() || series.size() != variances.size())
            throw std::invalid_argument("phaseu_statistic: one variance per tone is required");
        double norm = 0.0;
        for (double v : variances)
        {
            if (!(v > 0.0))
                throw std::invalid_argument("phaseu_statistic: variances must be positive");
            norm += 1.0 / v;
        }
        double s = 0.0;
        for (std::size_t f = 0; f < series.size(); ++f)
            s += (1.0 / variances[f]) / norm * circular_sample_variance(series[f]);
        return s;
    }

    inline Truth phaseu_decide(const std::vector<std::vector<double>> &series, std::span<const double> variances, double xi)
    {
        return phaseu_statistic(series, variances) <= xi ? Truth::los : Truth::nlos;
    }
}
