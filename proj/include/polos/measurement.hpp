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

#include "polos/geometry.hpp"
#include "polos/polarization.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace polos
{
    inline constexpr double speed_of_light = 3e8;                        // [m/s]
    inline constexpr double free_space_impedance = 120.0 * std::numbers::pi; // Z0 [Ohm]
    inline constexpr double uniform_phase_variance = std::numbers::pi * std::numbers::pi / 3.0;
    inline constexpr double snr_floor = 1e-9;
    inline constexpr double field_epsilon = 1e-12;

    // Carrier phase stored as a fixed-point fraction of a full turn (2^64 steps per cycle).
    // Addition wraps modulo 2*pi exactly, so terms common to all measurements cancel
    // bit-for-bit in phase differences.
    class BinaryAngle
    {
    public:
        constexpr BinaryAngle() = default;
        constexpr explicit BinaryAngle(std::uint64_t raw) : raw_(raw) {}

        static constexpr std::uint64_t half_turn = std::uint64_t(1) << 63;

        // Any finite number of turns; only the fractional part is kept
        static BinaryAngle from_turns(double turns)
        {
            if (!std::isfinite(turns))
                throw std::invalid_argument("BinaryAngle: non-finite phase");
            const double frac = turns - std::floor(turns);
            const double scaled = std::ldexp(frac, 64);
            if (!(scaled < 18446744073709551616.0))
                return BinaryAngle(0);
            return BinaryAngle(static_cast<std::uint64_t>(scaled));
        }

        static BinaryAngle from_radians(double rad) { return from_turns(rad / (2.0 * std::numbers::pi)); }

        constexpr std::uint64_t raw() const { return raw_; }

        // In [0, 2*pi)
        double radians() const
        {
            const double r = std::ldexp(static_cast<double>(raw_), -64) * (2.0 * std::numbers::pi);
            return r < 2.0 * std::numbers::pi ? r : 0.0;
        }

        // Signed reading in (-pi, pi]
        double signed_radians() const
        {
            if (raw_ == half_turn)
                return std::numbers::pi;
            return static_cast<double>(static_cast<std::int64_t>(raw_)) * (std::numbers::pi / 9223372036854775808.0);
        }

        friend constexpr BinaryAngle operator+(BinaryAngle a, BinaryAngle b) { return BinaryAngle(a.raw_ + b.raw_); }
        friend constexpr BinaryAngle operator-(BinaryAngle a, BinaryAngle b) { return BinaryAngle(a.raw_ - b.raw_); }
        friend constexpr bool operator==(BinaryAngle, BinaryAngle) = default;

    private:
        std::uint64_t raw_ = 0;
    };

    enum class Truth
    {
        los,
        nlos
    };

    inline std::string_view to_string(Truth t) { return t == Truth::los ? "LOS" : "NLOS"; }

    enum class Pol
    {
        V = 0,
        H = 1
    };

    // Polarization configuration (receive, transmit)
    struct PolConfig
    {
        Pol rx = Pol::V;
        Pol tx = Pol::V;

        constexpr int index() const { return 2 * int(rx) + int(tx); }
        FieldPattern rx_pattern() const { return rx == Pol::V ? FieldPattern{1.0, 0.0} : FieldPattern{0.0, 1.0}; }
        FieldPattern tx_pattern() const { return tx == Pol::V ? FieldPattern{1.0, 0.0} : FieldPattern{0.0, 1.0}; }
        Vec3 rx_orientation() const { return rx == Pol::V ? orientation_vertical : orientation_horizontal; }
    };

    // Index order used throughout: VV, VH, HV, HH
    inline constexpr std::array<PolConfig, 4> all_configs{
        PolConfig{Pol::V, Pol::V}, PolConfig{Pol::V, Pol::H}, PolConfig{Pol::H, Pol::V}, PolConfig{Pol::H, Pol::H}};

    inline constexpr std::array<std::string_view, 4> config_names{"VV", "VH", "HV", "HH"};

    // full: both ends dual-polarized; transmit: only the transmitter switches (receiver fixed H);
    // receive: only the receiver switches (transmitter fixed H)
    enum class Diversity
    {
        full,
        transmit,
        receive
    };

    inline std::string_view to_string(Diversity d)
    {
        switch (d)
        {
        case Diversity::full:
            return "full";
        case Diversity::transmit:
            return "tx";
        case Diversity::receive:
            return "rx";
        }
        return "?";
    }

    inline constexpr bool config_active(Diversity d, PolConfig c)
    {
        switch (d)
        {
        case Diversity::full:
            return true;
        case Diversity::transmit:
            return c.rx == Pol::H;
        case Diversity::receive:
            return c.tx == Pol::H;
        }
        return false;
    }

    struct RadioParams
    {
        double f0 = 30e9;                          // first tone [Hz]
        double tone_spacing = 1e6;                 // [Hz]
        int num_tones = 1;                         // F
        double loop_bandwidth = 20.0;              // B [Hz]
        double integration_time = 10e-3;           // T [s]
        double noise_psd = std::pow(10.0, -20.38); // N0 [W/Hz]
        double rx_gain = 1.0;                      // G, linear

        double wavelength(int tone) const { return speed_of_light / (f0 + tone * tone_spacing); }

        void validate() const
        {
            if (!(f0 > 0.0 && tone_spacing > 0.0 && loop_bandwidth > 0.0 && integration_time > 0.0 && noise_psd > 0.0 &&
                  rx_gain > 0.0))
                throw std::invalid_argument("radio parameters must be positive");
            if (num_tones < 1)
                throw std::invalid_argument("number of tones must be >= 1");
        }
    };

    // One sampled world instance
    struct Scenario
    {
        Truth truth = Truth::los;
        double path_gain = 1e-10;    // P, linear
        double distance = 10.0;      // d [m]
        double clock_offset = 0.0;   // [rad]
        EulerAngles ue_rotation;     // beta
        EulerAngles reflector_rotation; // delta (NLOS)
        double incidence = 0.0;      // alpha [rad] (NLOS)
        Material material{"glass", 6.0, 1e-14};
        DirectionAngles departure;
        DirectionAngles arrival;
        double scatter_var = 0.0;    // additive NLOS phase-noise power [rad^2]

        void validate() const
        {
            if (!(path_gain > 0.0) || !(distance > 0.0))
                throw std::invalid_argument("scenario: path gain and distance must be positive");
            if (!(scatter_var >= 0.0))
                throw std::invalid_argument("scenario: scatter variance must be >= 0");
            if (truth == Truth::nlos && !(incidence >= 0.0 && incidence <= std::numbers::pi / 2))
                throw std::invalid_argument("scenario: incidence angle outside [0, pi/2]");
        }
    };

    // Per-configuration rotation angles; tone independent
    struct LinkGeometry
    {
        std::array<double, 4> theta{};  // LOS
        std::array<NlosRotationAngles, 4> hops{}; // NLOS
    };

    // Throws DegenerateProjection if any configuration hits a degenerate projection
    inline LinkGeometry link_geometry(const Scenario &s)
    {
        LinkGeometry g;
        const Matrix3 Q = rotation_matrix(s.ue_rotation);
        for (const auto &c : all_configs)
        {
            const int k = c.index();
            if (s.truth == Truth::los)
                g.theta[k] = los_rotation_angle(c.tx_pattern(), c.rx_pattern(), c.rx_orientation(), Q, s.departure, s.arrival);
            else
                g.hops[k] = nlos_rotation_angles(s.ue_rotation, s.reflector_rotation, s.incidence, s.departure, s.arrival,
                                                 c.tx_pattern(), c.rx_pattern(), c.rx_orientation());
        }
        return g;
    }

    inline CouplingMatrix config_coupling(const Scenario &s, const LinkGeometry &g, PolConfig c, double wavelength)
    {
        const int k = c.index();
        if (s.truth == Truth::los)
            return coupling_matrix_los(g.theta[k]);
        const auto r = reflection_coefficients(complex_permittivity(s.material, wavelength), s.incidence);
        return coupling_matrix_nlos(g.hops[k].theta1, g.hops[k].theta2, r);
    }

    // E_r = sqrt(P Z0) F_r^T M F_t exp(-j 2 pi d / lambda)
    inline cdouble received_field(double path_gain, double distance, double wavelength, const FieldPattern &F_r,
                                  const CouplingMatrix &M, const FieldPattern &F_t)
    {
        if (!(path_gain > 0.0 && distance > 0.0 && wavelength > 0.0))
            throw std::invalid_argument("received_field: P, d and lambda must be positive");
        const double turns = distance / wavelength;
        const double frac = turns - std::floor(turns);
        const cdouble carrier = std::polar(1.0, -2.0 * std::numbers::pi * frac);
        return std::sqrt(path_gain * free_space_impedance) * M.project(F_r, F_t) * carrier;
    }

    // gamma = G lambda^2 |E_r|^2 / (480 pi^2 B N0)
    inline double snr(cdouble field, double rx_gain, double wavelength, double loop_bandwidth, double noise_psd)
    {
        if (!(loop_bandwidth > 0.0 && noise_psd > 0.0 && wavelength > 0.0))
            throw std::invalid_argument("snr: B, N0 and lambda must be positive");
        constexpr double pi2 = std::numbers::pi * std::numbers::pi;
        return rx_gain * wavelength * wavelength * std::norm(field) / (480.0 * pi2 * loop_bandwidth * noise_psd);
    }

    // Loop phase-noise variance, (1/gamma)(1 + 1/(T B gamma)); a uniform phase below the SNR floor
    inline double phase_noise_variance(double gamma, double integration_time, double loop_bandwidth)
    {
        if (!(integration_time > 0.0 && loop_bandwidth > 0.0))
            throw std::invalid_argument("phase_noise_variance: T and B must be positive");
        if (!(gamma > snr_floor))
            return uniform_phase_variance;
        return (1.0 / gamma) * (1.0 + 1.0 / (integration_time * loop_bandwidth * gamma));
    }

    struct PolarizationPhase
    {
        double phase = 0.0;       // arg(F_r^T M F_t) in (-pi, pi]
        bool signal_free = false; // |F_r^T M F_t| below field_epsilon; phase is meaningless
    };

    inline PolarizationPhase polarization_phase(const FieldPattern &F_r, const CouplingMatrix &M, const FieldPattern &F_t)
    {
        const cdouble g = M.project(F_r, F_t);
        if (std::abs(g) < field_epsilon)
            return {0.0, true};
        return {std::atan2(g.imag(), g.real()), false};
    }

    struct PhaseMeasurement
    {
        BinaryAngle phase;       // measured carrier phase
        double variance = 0.0;   // true thermal noise variance [rad^2]
        bool signal_free = false;

        double radians() const { return phase.radians(); }
    };

    struct MeasurementOptions
    {
        bool noiseless = false; // drop thermal and scattering noise (variances are still reported)
    };

    // Consumes the same number of random draws whatever the outcome, so that measurement
    // noise stays aligned across scenarios that differ only in d, clock offset or material.
    template <class Rng>
    PhaseMeasurement synthesize_measurement(const Scenario &s, const LinkGeometry &g, PolConfig c, double wavelength,
                                            const RadioParams &params, Rng &rng, const MeasurementOptions &opt = {})
    {
        const CouplingMatrix M = config_coupling(s, g, c, wavelength);
        const FieldPattern F_r = c.rx_pattern(), F_t = c.tx_pattern();

        // the carrier term has unit modulus; leaving it out keeps the SNR bit-identical for any d
        const cdouble E = std::sqrt(s.path_gain * free_space_impedance) * M.project(F_r, F_t);
        const double gamma = snr(E, params.rx_gain, wavelength, params.loop_bandwidth, params.noise_psd);
        const PolarizationPhase pp = polarization_phase(F_r, M, F_t);

        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        const double z_thermal = normal(rng);
        const double z_scatter = normal(rng);
        const double u = uniform(rng);

        PhaseMeasurement out;
        out.signal_free = pp.signal_free;
        out.variance = pp.signal_free ? uniform_phase_variance
                                      : phase_noise_variance(gamma, params.integration_time, params.loop_bandwidth);

        const BinaryAngle common = BinaryAngle::from_turns(s.distance / wavelength) + BinaryAngle::from_radians(s.clock_offset);
        if (pp.signal_free)
        {
            out.phase = common + BinaryAngle::from_turns(u);
            return out;
        }

        BinaryAngle phase = common + BinaryAngle::from_radians(pp.phase);
        if (!opt.noiseless)
        {
            phase = phase + BinaryAngle::from_radians(std::sqrt(out.variance) * z_thermal);
            if (s.truth == Truth::nlos && s.scatter_var > 0.0)
                phase = phase + BinaryAngle::from_radians(std::sqrt(s.scatter_var) * z_scatter);
        }
        out.phase = phase;
        return out;
    }

    // Measurements for all tones. Every configuration is synthesized so that limited-diversity
    // views of the same trial share noise draws; the mask marks which ones the receiver collects.
    class PhaseMeasurementSet
    {
    public:
        using Tone = std::array<PhaseMeasurement, 4>;

        PhaseMeasurementSet() = default;
        PhaseMeasurementSet(std::vector<Tone> tones, Diversity diversity) : tones_(std::move(tones)), diversity_(diversity) {}

        int num_tones() const { return static_cast<int>(tones_.size()); }
        Diversity diversity() const { return diversity_; }
        bool active(PolConfig c) const { return config_active(diversity_, c); }
        bool active(int config_index) const { return active(all_configs[config_index]); }

        int num_active() const
        {
            int n = 0;
            for (const auto &c : all_configs)
                n += active(c) ? 1 : 0;
            return n * num_tones();
        }

        const PhaseMeasurement &at(int tone, PolConfig c) const { return tones_.at(tone)[c.index()]; }
        const PhaseMeasurement &at(int tone, int config_index) const { return tones_.at(tone)[config_index]; }
        PhaseMeasurement &at(int tone, int config_index) { return tones_.at(tone)[config_index]; }

        // Same measurements viewed under a different diversity mask
        PhaseMeasurementSet with_diversity(Diversity d) const { return PhaseMeasurementSet(tones_, d); }

        const std::vector<Tone> &tones() const { return tones_; }

    private:
        std::vector<Tone> tones_;
        Diversity diversity_ = Diversity::full;
    };

    template <class Rng>
    PhaseMeasurementSet measurement_set(const Scenario &s, const RadioParams &params, Diversity diversity, Rng &rng,
                                        const MeasurementOptions &opt = {})
    {
        s.validate();
        params.validate();
        const LinkGeometry g = link_geometry(s);

        std::vector<PhaseMeasurementSet::Tone> tones(static_cast<std::size_t>(params.num_tones));
        for (int f = 0; f < params.num_tones; ++f)
        {
            const double lambda = params.wavelength(f);
            for (const auto &c : all_configs)
                tones[f][c.index()] = synthesize_measurement(s, g, c, lambda, params, rng, opt);
        }
        return PhaseMeasurementSet(std::move(tones), diversity);
    }

    // Repeated observations of the VV configuration, as consumed by the phase-variance baseline.
    // Thermal and scattering noise are redrawn for every sample.
    struct PhaseSeries
    {
        std::vector<std::vector<double>> samples; // [tone][k], radians in [0, 2 pi)
        std::vector<double> variances;            // thermal variance per tone
    };

    template <class Rng>
    PhaseSeries phase_series(const Scenario &s, const RadioParams &params, int samples_per_tone, Rng &rng,
                             const MeasurementOptions &opt = {})
    {
        if (samples_per_tone < 2)
            throw std::invalid_argument("phase_series: need at least two samples per tone");
        const LinkGeometry g = link_geometry(s);
        constexpr PolConfig vv{Pol::V, Pol::V};

        PhaseSeries out;
        for (int f = 0; f < params.num_tones; ++f)
        {
            const double lambda = params.wavelength(f);
            std::vector<double> row;
            row.reserve(static_cast<std::size_t>(samples_per_tone));
            double var = 0.0;
            for (int k = 0; k < samples_per_tone; ++k)
            {
                const auto m = synthesize_measurement(s, g, vv, lambda, params, rng, opt);
                row.push_back(m.radians());
                var = m.variance;
            }
            out.samples.push_back(std::move(row));
            out.variances.push_back(var);
        }
        return out;
    }
}
