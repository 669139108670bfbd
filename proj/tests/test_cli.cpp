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

#include "polos/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace polos;

namespace
{
    struct Run
    {
        int code = 0;
        std::string out;
        std::string err;
    };

    Run run(std::vector<std::string> args)
    {
        args.insert(args.begin(), "polos");
        std::vector<const char *> argv;
        for (const auto &a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        Run r;
        r.code = cli::parse_and_run(static_cast<int>(argv.size()), argv.data(), out, err);
        r.out = out.str();
        r.err = err.str();
        return r;
    }

    std::vector<std::string> lines(const std::string &s)
    {
        std::vector<std::string> out;
        std::istringstream in(s);
        for (std::string l; std::getline(in, l);)
            out.push_back(l);
        return out;
    }

    std::string slurp(const std::string &path)
    {
        std::ifstream f(path, std::ios::binary);
        return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    }

    std::string temp_path(const std::string &name) { return ::testing::TempDir() + name; }
}

TEST(Cli, SweepPowerWritesSchema)
{
    const auto r = run({"sweep-power", "--trials", "200", "--values", "-110,-90", "--weighting", "all", "--workers", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 7u);
    EXPECT_EQ(l[0], "axis,variant,pmd,pfa,aer,xi_opt,aer_opt,n_trials,seed");
    EXPECT_EQ(l[1].rfind("-110,equ-full,", 0), 0u);
    EXPECT_EQ(l[6].rfind("-90,nvp-full,", 0), 0u);
    EXPECT_EQ(r.out.find('\r'), std::string::npos);
    // summary goes to stderr when the table is on stdout
    EXPECT_NE(r.err.find("AER_opt"), std::string::npos);
}

TEST(Cli, OutputFileMatchesStdout)
{
    const std::string path = temp_path("polos_cli_out.csv");
    const std::vector<std::string> base{"sweep-tones", "--trials", "150", "--values", "1,2", "--phaseu", "--seed", "5"};
    auto with_file = base;
    with_file.insert(with_file.end(), {"--out", path, "--workers", "2"});
    auto to_stdout = base;
    to_stdout.insert(to_stdout.end(), {"--workers", "1"});
    const auto a = run(with_file);
    const auto b = run(to_stdout);
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(path), b.out);
    EXPECT_NE(a.out.find("AER_opt"), std::string::npos);
}

TEST(Cli, SweepThresholdAxisIsXi)
{
    const auto r = run({"sweep-threshold", "--trials", "100", "--xi-count", "4", "--workers", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 5u);
    EXPECT_EQ(l[1].rfind("1e-06,nvp-full,", 0), 0u);
}

TEST(Cli, ConfigurationErrorsExitWithTwo)
{
    EXPECT_EQ(run({"sweep-power", "--bogus"}).code, 2);
    EXPECT_EQ(run({"sweep-power", "--material", "granite"}).code, 2);
    EXPECT_EQ(run({"sweep-power", "--weighting", "best"}).code, 2);
    EXPECT_EQ(run({"sweep-power", "--prior", "1.5"}).code, 2);
    EXPECT_EQ(run({"sweep-tones", "--values", "0"}).code, 2);
    EXPECT_EQ(run({"sweep-power", "--materials-file", temp_path("does_not_exist.csv")}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    const auto r = run({"sweep-power", "--material", "granite"});
    EXPECT_NE(r.err.find("--material"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, ConfigFileAndFlagPrecedence)
{
    const std::string cfg = temp_path("polos_cli.ini");
    std::ofstream(cfg) << "trials=120\nseed=9\nweighting=equ\n";
    const auto r = run({"sweep-power", "--config", cfg, "--values", "-100", "--seed", "11", "--workers", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l[1].rfind("-100,equ-full,", 0), 0u);
    EXPECT_NE(l[1].find(",120,11"), std::string::npos);
}

TEST(Cli, MaterialsFileExtendsTable)
{
    const std::string path = temp_path("polos_materials.csv");
    std::ofstream(path) << "# extra\nbrick,3.8,0.02\n";
    const auto r = run({"materials", "--materials-file", path});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 7u);
    EXPECT_EQ(l[0], "name,eps_r,kappa");
    EXPECT_EQ(l[6], "brick,3.8,0.02");

    const auto s = run({"sweep-power", "--materials-file", path, "--material", "Brick", "--trials", "100", "--values",
                        "-100", "--workers", "1"});
    EXPECT_EQ(s.code, 0) << s.err;
}

TEST(Cli, ClassifyMeasurements)
{
    const std::string json = R"({"measurements": [{"VV": {"phase": 0.1, "variance": 0.001},
        "VH": {"phase": 3.25, "variance": 0.001}, "HV": {"phase": 0.11, "variance": 0.001},
        "HH": {"phase": 3.24, "variance": 0.001}}], "truth": "LOS"})";
    const auto r = run({"classify-one", "--json", json, "--header"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l[0], "statistic,argmin,decision,xi,truth");
    EXPECT_NE(l[1].find(",LOS,0.002,LOS"), std::string::npos);

    const auto strict = run({"classify-one", "--json", json, "--xi", "1e-8"});
    ASSERT_EQ(strict.code, 0) << strict.err;
    EXPECT_NE(strict.out.find(",NLOS,1e-08,LOS"), std::string::npos);
    EXPECT_EQ(lines(strict.out).size(), 1u);
}

TEST(Cli, ClassifyScenario)
{
    const std::string json = R"({"scenario": {"truth": "LOS", "power_db": -80, "arrival": [1.5707963267948966, 0.0],
        "ue_rotation": [0.2, -0.1, 0.4], "tones": 2}, "seed": 3})";
    const auto r = run({"classify-one", "--json", json});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find(",LOS,0.002,LOS"), std::string::npos);

    const std::string path = temp_path("polos_scenario.json");
    std::ofstream(path) << json;
    const auto f = run({"classify-one", "--json-file", path});
    EXPECT_EQ(f.out, r.out);
}

TEST(Cli, ClassifyRejectsBadInput)
{
    EXPECT_EQ(run({"classify-one", "--json", "{not json"}).code, 2);
    EXPECT_EQ(run({"classify-one", "--json", R"({"other": 1})"}).code, 2);
    EXPECT_EQ(run({"classify-one", "--json", R"({"measurements": [{"VV": {"phase": 0, "variance": 1}}]})"}).code, 2);
    EXPECT_EQ(run({"classify-one", "--json", R"({"scenario": {"material": "granite"}})"}).code, 2);
    EXPECT_EQ(run({"classify-one"}).code, 2);
    // a single differential only needs the two configurations it uses
    EXPECT_EQ(run({"classify-one", "--json",
                   R"({"diversity": "tx", "measurements": [{"HV": {"phase": 0, "variance": 1}, "HH": {"phase": 0.1, "variance": 1}}]})"})
                  .code,
              0);
}
