// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "metalic/csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace metalic {
namespace {

TEST(Csv, WritesSchemaLineAndHeader) {
    std::ostringstream os;
    CsvWriter w(os, {"a", "b", "c"});
    w << 1 << 0.5 << "x";
    w.end_row();
    EXPECT_EQ(os.str(), "schema_version,1\na,b,c\n1,0.5,x\n");
}

TEST(Csv, RowWidthChecked) {
    std::ostringstream os;
    CsvWriter w(os, {"a", "b"});
    w << 1;
    EXPECT_THROW(w.end_row(), std::logic_error);
}

TEST(Csv, RealsRoundTripExactly) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    std::ostringstream os;
    CsvWriter w(os, {"v"});
    std::vector<double> values{0.1, 1.0 / 3.0, 1e-300, -0.0, std::numeric_limits<double>::max()};
    for (int i = 0; i < 200; ++i) values.push_back(d(rng) * std::pow(10.0, i % 30 - 15));
    for (double v : values) {
        w << v;
        w.end_row();
    }
    std::istringstream is(os.str());
    const CsvTable t = read_csv(is);
    ASSERT_EQ(t.rows.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) EXPECT_EQ(t.real(i, "v"), values[i]);
}

TEST(Csv, ReaderRejectsWrongVersionAndMissingColumns) {
    std::istringstream v2("schema_version,2\na\n1\n");
    EXPECT_THROW(read_csv(v2), SchemaError);
    std::istringstream none("a,b\n1,2\n");
    EXPECT_THROW(read_csv(none), SchemaError);
    std::istringstream ragged("schema_version,1\na,b\n1\n");
    EXPECT_THROW(read_csv(ragged), SchemaError);
    std::istringstream ok("schema_version,1\na,b\n1,\n");
    const CsvTable t = read_csv(ok);
    EXPECT_EQ(t.text(0, "b"), "");
    EXPECT_THROW(t.column("c"), SchemaError);
}

}  // namespace
}  // namespace metalic
