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

#include "polos/measurement.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace polos;

namespace
{
    constexpr double pi = std::numbers::pi;

    // LOS link with an unrotated receiver at 45 degrees azimuth: VV coupling is -1, VH vanishes
    Scenario unrotated_los(double path_gain)
    {
        Scenario s;
        s.truth = Truth::los;
        s.path_gain = path_gain;
        s.arrival = {pi / 4, 0.0};
        return s;
    }

    Scenario random_scenario(std::mt19937_64 &rng, Truth truth)
    {
        std::uniform_real_distribution<double> U(-pi, pi), E(-pi / 2, pi / 2), A(0.0, pi / 2);
        Scenario s;
        s.truth = truth;
        s.ue_rotation = {U(rng), U(rng), U(rng)};
        s.reflector_rotation = {U(rng), U(rng), U(rng)};
        s.incidence = A(rng);
        s.departure = {U(rng), E(rng)};
        s.arrival = {U(rng), E(rng)};
        s.material = builtin_materials()[2];
        return s;
    }
}

TEST(BinaryAngle, RoundTripAndWrap)
{
    EXPECT_EQ(BinaryAngle::from_turns(0.25).raw(), std::uint64_t(1) << 62);
    EXPECT_EQ(BinaryAngle::from_turns(3.25), BinaryAngle::from_turns(0.25));
    EXPECT_EQ(BinaryAngle::from_turns(-0.75), BinaryAngle::from_turns(0.25));
    EXPECT_NEAR(BinaryAngle::from_radians(1.0).radians(), 1.0, 1e-15);
    EXPECT_NEAR(BinaryAngle::from_radians(-1.0).signed_radians(), -1.0, 1e-15);
    EXPECT_DOUBLE_EQ(BinaryAngle(BinaryAngle::half_turn).signed_radians(), pi);
    EXPECT_THROW(BinaryAngle::from_turns(std::nan("")), std::invalid_argument);

    const BinaryAngle a = BinaryAngle::from_radians(0.1), b = BinaryAngle::from_radians(2 * pi - 0.1);
    EXPECT_NEAR((a - b).signed_radians(), 0.2, 1e-12);
    EXPECT_EQ((a + b) - b, a);
}

TEST(Configs, IndexOrderAndMasks)
{
    for (int k = 0; k < 4; ++k)
        EXPECT_EQ(all_configs[k].index(), k);
    EXPECT_EQ(config_names[1], "VH");
    EXPECT_EQ(all_configs[1].rx, Pol::V);
    EXPECT_EQ(all_configs[1].tx, Pol::H);

    EXPECT_FALSE(config_active(Diversity::transmit, all_configs[0]));
    EXPECT_FALSE(config_active(Diversity::transmit, all_configs[1]));
    EXPECT_TRUE(config_active(Diversity::transmit, all_configs[2]));
    EXPECT_TRUE(config_active(Diversity::transmit, all_configs[3]));
    EXPECT_TRUE(config_active(Diversity::receive, all_configs[1]));
    EXPECT_TRUE(config_active(Diversity::receive, all_configs[3]));
    EXPECT_FALSE(config_active(Diversity::receive, all_configs[2]));
}

TEST(Snr, ReferenceValue)
{
    // |E|^2 = P Z0 for a unit coupling
    const double P = 1e-10, lambda = 0.01;
    const cdouble E = std::sqrt(P * free_space_impedance);
    const double gamma = snr(E, 1.0, lambda, 20.0, std::pow(10.0, -20.38));
    EXPECT_NEAR(gamma / 9544.6529178378044, 1.0, 1e-12);
}

TEST(Snr, ReceivedFieldMagnitude)
{
    const Scenario s = unrotated_los(1e-10);
    const LinkGeometry g = link_geometry(s);
    const CouplingMatrix M = config_coupling(s, g, all_configs[0], 0.01);
    const cdouble E = received_field(s.path_gain, s.distance, 0.01, {1, 0}, M, {1, 0});
    EXPECT_NEAR(std::abs(E), std::sqrt(1e-10 * free_space_impedance), 1e-18);
    EXPECT_THROW(received_field(0.0, 1.0, 0.01, {1, 0}, M, {1, 0}), std::invalid_argument);
}

TEST(PhaseNoiseVariance, FormulaAndFloor)
{
    EXPECT_NEAR(phase_noise_variance(100.0, 0.01, 20.0), 0.0105, 1e-15);
    EXPECT_EQ(phase_noise_variance(0.0, 0.01, 20.0), uniform_phase_variance);
    EXPECT_EQ(phase_noise_variance(1e-9, 0.01, 20.0), uniform_phase_variance);
    EXPECT_THROW(phase_noise_variance(1.0, 0.0, 20.0), std::invalid_argument);

    double prev = phase_noise_variance(1e-8, 0.01, 20.0);
    for (double g = 1e-7; g < 1e9; g *= 3.0)
    {
        const double v = phase_noise_variance(g, 0.01, 20.0);
        ASSERT_LT(v, prev);
        prev = v;
    }
}

TEST(PolarizationPhase, LosPhasesAreZeroOrPi)
{
    std::mt19937_64 rng(21);
    for (int k = 0; k < 5000; ++k)
    {
        const Scenario s = random_scenario(rng, Truth::los);
        const LinkGeometry g = link_geometry(s);
        for (const auto &c : all_configs)
        {
            const auto pp = polarization_phase(c.rx_pattern(), config_coupling(s, g, c, 0.01), c.tx_pattern());
            if (pp.signal_free)
                continue;
            ASSERT_TRUE(pp.phase == 0.0 || std::abs(pp.phase) == pi) << pp.phase;
        }
    }
}

TEST(PolarizationPhase, SignalFreeConfiguration)
{
    // unit rotation, so the cross-polarized coupling vanishes
    const auto pp = polarization_phase({1, 0}, coupling_matrix_los(0.0), {0, 1});
    EXPECT_TRUE(pp.signal_free);
}

TEST(Measurement, NoiselessPhaseIsCarrierPlusPolarization)
{
    Scenario s = unrotated_los(1e-10);
    s.distance = 10.0025;
    s.clock_offset = 0.3;
    const RadioParams params;
    std::mt19937_64 rng(1);
    const auto set = measurement_set(s, params, Diversity::full, rng, {true});
    const double lambda = params.wavelength(0);
    const double expected = std::remainder(2 * pi * (s.distance / lambda) + 0.3 + pi, 2 * pi);
    EXPECT_NEAR(std::remainder(set.at(0, 0).radians() - expected, 2 * pi), 0.0, 1e-9);
}

TEST(Measurement, SignalFreeUsesUniformPhaseAndCappedVariance)
{
    const Scenario s = unrotated_los(1e-10);
    const RadioParams params;
    std::mt19937_64 rng(4);
    const auto set = measurement_set(s, params, Diversity::full, rng);
    // VH vanishes for the unrotated receiver
    EXPECT_TRUE(set.at(0, 1).signal_free);
    EXPECT_EQ(set.at(0, 1).variance, uniform_phase_variance);
    EXPECT_FALSE(set.at(0, 0).signal_free);
}

TEST(Measurement, EmpiricalVarianceMatchesModel)
{
    const RadioParams params;
    const double target = 0.01;
    // bisection on log P for the path gain giving the target variance
    double lo = -140.0, hi = -60.0;
    for (int it = 0; it < 200; ++it)
    {
        const double mid = 0.5 * (lo + hi);
        const Scenario s = unrotated_los(std::pow(10.0, mid / 10.0));
        const LinkGeometry g = link_geometry(s);
        const cdouble E = received_field(s.path_gain, s.distance, params.wavelength(0), {1, 0},
                                         config_coupling(s, g, all_configs[0], params.wavelength(0)), {1, 0});
        const double v = phase_noise_variance(snr(E, 1.0, params.wavelength(0), params.loop_bandwidth, params.noise_psd),
                                              params.integration_time, params.loop_bandwidth);
        (v > target ? lo : hi) = mid;
    }
    const Scenario s = unrotated_los(std::pow(10.0, 0.5 * (lo + hi) / 10.0));
    const LinkGeometry g = link_geometry(s);
    std::mt19937_64 rng(99);
    const auto clean = synthesize_measurement(s, g, all_configs[0], params.wavelength(0), params, rng, {true});
    ASSERT_NEAR(clean.variance, target, 1e-9);

    const int n = 100000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
    {
        const auto m = synthesize_measurement(s, g, all_configs[0], params.wavelength(0), params, rng);
        const double r = (m.phase - clean.phase).signed_radians();
        acc += r * r;
    }
    EXPECT_NEAR(acc / n / target, 1.0, 0.03);
}

TEST(Measurement, ScatterOnlyAffectsNlos)
{
    const RadioParams params;
    std::mt19937_64 gen(6);
    Scenario los = random_scenario(gen, Truth::los);
    los.scatter_var = 0.5;
    std::mt19937_64 r1(3), r2(3);
    Scenario los0 = los;
    los0.scatter_var = 0.0;
    const auto a = measurement_set(los, params, Diversity::full, r1);
    const auto b = measurement_set(los0, params, Diversity::full, r2);
    for (int k = 0; k < 4; ++k)
        EXPECT_EQ(a.at(0, k).phase, b.at(0, k).phase);

    Scenario nlos = random_scenario(gen, Truth::nlos);
    nlos.scatter_var = 0.5;
    Scenario nlos0 = nlos;
    nlos0.scatter_var = 0.0;
    std::mt19937_64 r3(3), r4(3);
    const auto c = measurement_set(nlos, params, Diversity::full, r3);
    const auto d = measurement_set(nlos0, params, Diversity::full, r4);
    EXPECT_NE(c.at(0, 0).phase, d.at(0, 0).phase);
}

TEST(Measurement, DrawCountIndependentOfOutcome)
{
    // the generator state afterwards depends only on the number of tones
    const RadioParams params;
    std::mt19937_64 gen(12);
    const Scenario a = random_scenario(gen, Truth::los);
    const Scenario b = random_scenario(gen, Truth::nlos);
    std::mt19937_64 r1(8), r2(8);
    (void)measurement_set(a, params, Diversity::full, r1);
    (void)measurement_set(b, params, Diversity::receive, r2, {true});
    EXPECT_EQ(r1(), r2());
}

TEST(Measurement, ScenarioValidation)
{
    Scenario s;
    s.path_gain = 0.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = Scenario{};
    s.truth = Truth::nlos;
    s.incidence = 2.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    RadioParams p;
    p.num_tones = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(PhaseSeries, ShapeAndVariance)
{
    const RadioParams params{.num_tones = 3};
    const Scenario s = unrotated_los(1e-10);
    std::mt19937_64 rng(5);
    const auto ps = phase_series(s, params, 25, rng);
    ASSERT_EQ(ps.samples.size(), 3u);
    ASSERT_EQ(ps.variances.size(), 3u);
    for (const auto &row : ps.samples)
    {
        ASSERT_EQ(row.size(), 25u);
        for (double p : row)
        {
            ASSERT_GE(p, 0.0);
            ASSERT_LT(p, 2 * pi);
        }
    }
    EXPECT_THROW(phase_series(s, params, 1, rng), std::invalid_argument);
}
