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

#include "polos/montecarlo.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

namespace polos
{
    inline constexpr const char *sweep_csv_header = "axis,variant,pmd,pfa,aer,xi_opt,aer_opt,n_trials,seed";

    // 9 significant digits, '.' decimal separator whatever the global locale
    inline std::string format_real(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        std::string s(buf);
        for (auto &c : s)
            if (c == ',')
                c = '.';
        return s;
    }

    inline void write_csv(std::span<const SweepRow> rows, std::ostream &os)
    {
        os << sweep_csv_header << '\n';
        for (const auto &r : rows)
        {
            os << format_real(r.axis) << ',' << r.variant << ',' << format_real(r.pmd) << ',' << format_real(r.pfa) << ','
               << format_real(r.aer) << ',' << format_real(r.xi_opt) << ',' << format_real(r.aer_opt) << ',' << r.n_trials
               << ',' << r.seed << '\n';
        }
    }

    // Writes to the file at path, or to fallback when path is empty. An empty table is an
    // error and leaves no file behind.
    inline void emit_csv(std::span<const SweepRow> rows, const std::string &path, std::ostream &fallback)
    {
        if (rows.empty())
            throw std::runtime_error("emit_csv: refusing to write an empty table");
        if (path.empty())
        {
            write_csv(rows, fallback);
            fallback.flush();
            return;
        }
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        write_csv(rows, f);
        f.flush();
        if (!f)
            throw std::runtime_error("write to '" + path + "' failed");
    }
}
