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

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polos
{
    using Vec2 = std::array<double, 2>;
    using Vec3 = std::array<double, 3>;

    // Rotation of an antenna (or reflector) frame about the x, y and z axes in [rad]
    struct EulerAngles
    {
        double beta_x = 0.0;
        double beta_y = 0.0;
        double beta_z = 0.0;
    };

    inline EulerAngles operator-(const EulerAngles &a, const EulerAngles &b)
    {
        return {a.beta_x - b.beta_x, a.beta_y - b.beta_y, a.beta_z - b.beta_z};
    }

    // Departure or arrival direction: azimuth in [-pi, pi], elevation in [-pi/2, pi/2]
    struct DirectionAngles
    {
        double azimuth = 0.0;
        double elevation = 0.0;
    };

    // Two-element field pattern (vertical, horizontal) after beamforming
    struct FieldPattern
    {
        double v = 0.0;
        double h = 0.0;

        double norm() const { return std::hypot(v, h); }
    };

    // Receive orientation vectors for vertically / horizontally polarized reception
    inline constexpr Vec3 orientation_vertical{1.0, 0.0, 0.0};
    inline constexpr Vec3 orientation_horizontal{0.0, 1.0, 0.0};

    // Guard on the projected orientation length below which the projection is undefined
    inline constexpr double projection_epsilon = 1e-9;

    struct Matrix3
    {
        std::array<std::array<double, 3>, 3> m{};

        double operator()(int r, int c) const { return m[r][c]; }
        double &operator()(int r, int c) { return m[r][c]; }

        static Matrix3 identity()
        {
            Matrix3 I;
            I.m[0][0] = I.m[1][1] = I.m[2][2] = 1.0;
            return I;
        }

        Matrix3 transpose() const
        {
            Matrix3 t;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    t.m[r][c] = m[c][r];
            return t;
        }

        double determinant() const
        {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        }

        Vec3 operator*(const Vec3 &v) const
        {
            Vec3 out{};
            for (int r = 0; r < 3; ++r)
                out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
            return out;
        }

        Matrix3 operator*(const Matrix3 &o) const
        {
            Matrix3 out;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    out.m[r][c] = m[r][0] * o.m[0][c] + m[r][1] * o.m[1][c] + m[r][2] * o.m[2][c];
            return out;
        }
    };

    class DegenerateProjection : public std::runtime_error
    {
    public:
        DegenerateProjection() : std::runtime_error("orientation vector is parallel to the wave travel direction") {}
    };

    // Orientation change of the receive antenna frame with respect to the transmit frame.
    // Composition Rz(-bz) * Ry(-by) * Rx(-bx), evaluated in closed form.
    inline Matrix3 rotation_matrix(const EulerAngles &e)
    {
        const double cx = std::cos(e.beta_x), sx = std::sin(e.beta_x);
        const double cy = std::cos(e.beta_y), sy = std::sin(e.beta_y);
        const double cz = std::cos(e.beta_z), sz = std::sin(e.beta_z);

        Matrix3 Q;
        Q.m[0] = {cz * cy, sz * cx + cz * sy * sx, sz * sx - cz * sy * cx};
        Q.m[1] = {-sz * cy, cz * cx - sz * sy * sx, cz * sx + sz * sy * cx};
        Q.m[2] = {sy, -cy * sx, cy * cx};
        return Q;
    }

    // Unit polarization vector of the receive antenna projected onto the plane orthogonal
    // to the wave travel direction. Throws DegenerateProjection if the projection vanishes.
    inline Vec2 receive_polarization_projection(const Vec3 &orientation, const Matrix3 &Q, const DirectionAngles &arrival)
    {
        const Vec3 o = Q * orientation;
        const double cp = std::cos(arrival.azimuth), sp = std::sin(arrival.azimuth);
        const double ct = std::cos(arrival.elevation), st = std::sin(arrival.elevation);

        // Rows 1 and 3 of the travel-direction alignment; the y row is dropped by the projection
        const double x = -(sp * o[0] - cp * o[1]);
        const double z = -(st * cp * o[0] + st * sp * o[1] - ct * o[2]);

        const double len = std::hypot(x, z);
        if (!(len > projection_epsilon))
            throw DegenerateProjection();
        return {x / len, z / len};
    }

    // Intermediate quantities of the geometric rotation angle, kept for inspection
    struct RotationAngleParts
    {
        Vec2 p_t{};               // normalized transmit polarization
        Vec2 p_r{};               // projected receive polarization
        double psi = 0.0;         // angle between p_t and p_r
        double mismatch_t = 0.0;  // transmit polarization mismatch angle
        double mismatch_r = 0.0;  // receive polarization mismatch angle
        double theta = 0.0;       // mismatch_t - mismatch_r - psi (not wrapped)
    };

    inline RotationAngleParts los_rotation_parts(const FieldPattern &F_t, const FieldPattern &F_r, const Vec3 &orientation,
                                                 const Matrix3 &Q, const DirectionAngles & /*departure*/,
                                                 const DirectionAngles &arrival)
    {
        const double nt = F_t.norm();
        if (!(nt > 0.0))
            throw std::invalid_argument("los_rotation_angle: transmit field pattern is zero");

        RotationAngleParts out;
        out.p_t = {F_t.v / nt, F_t.h / nt};
        out.p_r = receive_polarization_projection(orientation, Q, arrival);
        const double dot = std::clamp(out.p_t[0] * out.p_r[0] + out.p_t[1] * out.p_r[1], -1.0, 1.0);
        out.psi = std::acos(dot);
        out.mismatch_t = std::atan2(F_t.h, F_t.v);
        out.mismatch_r = std::atan2(F_r.h, F_r.v);
        out.theta = out.mismatch_t - out.mismatch_r - out.psi;
        return out;
    }

    // Polarization rotation angle between a transmit field pattern and a rotated receive antenna.
    // The departure direction does not enter with direction-independent field patterns; it is
    // accepted so that callers keep the full link description in one place.
    inline double los_rotation_angle(const FieldPattern &F_t, const FieldPattern &F_r, const Vec3 &orientation,
                                     const Matrix3 &Q, const DirectionAngles &departure, const DirectionAngles &arrival)
    {
        return los_rotation_parts(F_t, F_r, orientation, Q, departure, arrival).theta;
    }
}
