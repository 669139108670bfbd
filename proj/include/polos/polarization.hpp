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

#include <algorithm>
#include <array>
#include <cctype>
#include <complex>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polos
{
    using cdouble = std::complex<double>;

    // Electric properties of a reflecting surface
    struct Material
    {
        std::string name;
        double eps_r = 1.0; // relative permittivity
        double kappa = 0.0; // conductivity [S/m]
    };

    // Built-in reflectors (permittivity and conductivity at mm-wave frequencies)
    inline const std::vector<Material> &builtin_materials()
    {
        static const std::vector<Material> table{
            {"glass", 6.0, 1e-14},
            {"wood", 1.2, 1e-4},
            {"moist concrete", 2.3, 1e-2},
            {"distilled water", 4.0, 5.0},
            {"conductor", 30.0, 10.0},
        };
        return table;
    }

    namespace detail
    {
        inline std::string lower(std::string_view s)
        {
            std::string out(s);
            std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return char(std::tolower(c)); });
            return out;
        }

        inline std::string trim(std::string_view s)
        {
            const auto first = s.find_first_not_of(" \t\r\n");
            if (first == std::string_view::npos)
                return {};
            const auto last = s.find_last_not_of(" \t\r\n");
            return std::string(s.substr(first, last - first + 1));
        }
    }

    inline void validate(const Material &m)
    {
        if (!(m.eps_r >= 1.0) || !std::isfinite(m.eps_r))
            throw std::invalid_argument("material '" + m.name + "': eps_r must be >= 1");
        if (!(m.kappa >= 0.0) || !std::isfinite(m.kappa))
            throw std::invalid_argument("material '" + m.name + "': kappa must be >= 0");
    }

    // Case-insensitive lookup; the first match wins
    inline std::optional<Material> find_material(const std::vector<Material> &table, std::string_view name)
    {
        const std::string key = detail::lower(detail::trim(name));
        for (const auto &m : table)
            if (detail::lower(m.name) == key)
                return m;
        return std::nullopt;
    }

    // Parses "name,eps_r,kappa" records. Blank lines and lines starting with '#' are skipped.
    inline std::vector<Material> parse_materials(std::istream &in)
    {
        std::vector<Material> out;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            const std::string t = detail::trim(line);
            if (t.empty() || t.front() == '#')
                continue;

            std::array<std::string, 3> fields;
            std::stringstream ss(t);
            int n = 0;
            std::string field;
            while (std::getline(ss, field, ','))
            {
                if (n == 3)
                {
                    n = 4;
                    break;
                }
                fields[n++] = detail::trim(field);
            }
            if (n != 3 || fields[0].empty())
                throw std::runtime_error("materials file line " + std::to_string(line_no) + ": expected name,eps_r,kappa");

            Material m;
            m.name = fields[0];
            try
            {
                std::size_t used = 0;
                m.eps_r = std::stod(fields[1], &used);
                if (used != fields[1].size())
                    throw std::invalid_argument("trailing");
                m.kappa = std::stod(fields[2], &used);
                if (used != fields[2].size())
                    throw std::invalid_argument("trailing");
            }
            catch (const std::logic_error &)
            {
                throw std::runtime_error("materials file line " + std::to_string(line_no) + ": invalid number");
            }
            try
            {
                validate(m);
            }
            catch (const std::invalid_argument &e)
            {
                throw std::runtime_error("materials file line " + std::to_string(line_no) + ": " + e.what());
            }
            out.push_back(std::move(m));
        }
        return out;
    }

    inline std::vector<Material> load_materials_file(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open materials file '" + path + "'");
        try
        {
            return parse_materials(f);
        }
        catch (const std::runtime_error &e)
        {
            throw std::runtime_error(path + ": " + e.what());
        }
    }

    // Built-in table extended (or overridden, by name) with user records
    inline std::vector<Material> merge_materials(std::vector<Material> base, const std::vector<Material> &extra)
    {
        for (const auto &m : extra)
        {
            auto it = std::find_if(base.begin(), base.end(),
                                   [&](const Material &b) { return detail::lower(b.name) == detail::lower(m.name); });
            if (it != base.end())
                *it = m;
            else
                base.push_back(m);
        }
        return base;
    }

    // eps = eps_r - j 60 kappa lambda
    inline cdouble complex_permittivity(const Material &m, double wavelength)
    {
        if (!(wavelength > 0.0))
            throw std::invalid_argument("complex_permittivity: wavelength must be positive");
        return {m.eps_r, -60.0 * m.kappa * wavelength};
    }

    struct ReflectionPair
    {
        cdouble r_perp;
        cdouble r_par;
    };

    // Fresnel coefficients for incidence angle alpha in [0, pi/2] measured from the surface normal.
    // std::sqrt returns the principal branch (non-negative real part).
    inline ReflectionPair reflection_coefficients(cdouble eps, double alpha)
    {
        if (!(alpha >= 0.0 && alpha <= std::numbers::pi / 2))
            throw std::invalid_argument("reflection_coefficients: alpha outside [0, pi/2]");

        // grazing incidence: both ratios collapse to -1
        if (alpha == std::numbers::pi / 2)
            return {cdouble(-1.0), cdouble(-1.0)};

        const double ca = std::cos(alpha);
        const double sa = std::sin(alpha);
        const cdouble root = std::sqrt(eps - sa * sa);
        return {(ca - root) / (ca + root), (eps * ca - root) / (eps * ca + root)};
    }

    // 2x2 complex polarization coupling matrix, row = receive (V, H), column = transmit (V, H)
    struct CouplingMatrix
    {
        std::array<std::array<cdouble, 2>, 2> m{};

        cdouble operator()(int r, int c) const { return m[r][c]; }

        CouplingMatrix operator*(const CouplingMatrix &o) const
        {
            CouplingMatrix out;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    out.m[r][c] = m[r][0] * o.m[0][c] + m[r][1] * o.m[1][c];
            return out;
        }

        double frobenius_norm() const
        {
            double s = 0.0;
            for (const auto &row : m)
                for (const auto &v : row)
                    s += std::norm(v);
            return std::sqrt(s);
        }

        // F_r^T M F_t
        cdouble project(const FieldPattern &F_r, const FieldPattern &F_t) const
        {
            return F_r.v * (m[0][0] * F_t.v + m[0][1] * F_t.h) + F_r.h * (m[1][0] * F_t.v + m[1][1] * F_t.h);
        }
    };

    inline CouplingMatrix coupling_matrix_los(double theta)
    {
        const double c = std::cos(theta), s = std::sin(theta);
        CouplingMatrix M;
        M.m[0] = {cdouble(c), cdouble(s)};
        M.m[1] = {cdouble(-s), cdouble(c)};
        return M;
    }

    // Rotation(theta2) * diag(R_perp, R_par) * Rotation(theta1)
    inline CouplingMatrix coupling_matrix_nlos(double theta1, double theta2, const ReflectionPair &r)
    {
        CouplingMatrix D;
        D.m[0] = {r.r_perp, cdouble(0.0)};
        D.m[1] = {cdouble(0.0), r.r_par};
        return coupling_matrix_los(theta2) * D * coupling_matrix_los(theta1);
    }

    struct NlosRotationAngles
    {
        double theta1 = 0.0; // transmitter -> reflector
        double theta2 = 0.0; // reflector -> receiver
    };

    // The reflector acts first as a virtual receiver (arrival azimuth alpha, elevation
    // theta_t - delta_x, orientation delta) and then as a virtual transmitter towards the
    // receiver, whose orientation relative to the reflector is beta - delta.
    inline NlosRotationAngles nlos_rotation_angles(const EulerAngles &ue_rotation, const EulerAngles &reflector_rotation,
                                                   double alpha, const DirectionAngles &departure,
                                                   const DirectionAngles &arrival, const FieldPattern &F_t,
                                                   const FieldPattern &F_r, const Vec3 &orientation)
    {
        const DirectionAngles at_reflector{alpha, departure.elevation - reflector_rotation.beta_x};
        NlosRotationAngles out;
        out.theta1 = los_rotation_angle(F_t, F_r, orientation, rotation_matrix(reflector_rotation), departure, at_reflector);
        out.theta2 = los_rotation_angle(F_t, F_r, orientation, rotation_matrix(ue_rotation - reflector_rotation), departure,
                                        arrival);
        return out;
    }
}
