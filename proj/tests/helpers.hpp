#pragma once

#include "summer/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

namespace summer::testing {

inline void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 0.0)
{
    ASSERT_EQ(t.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (tol == 0.0)
            EXPECT_EQ(t.values()[i], expected[i]) << "at " << i;
        else
            EXPECT_NEAR(t.values()[i], expected[i], tol) << "at " << i;
    }
}

inline std::vector<double> to_vector(const Tensor& t)
{
    return {t.values().begin(), t.values().end()};
}

template <typename E, typename F>
void expect_error_containing(F&& f, const std::string& fragment)
{
    try {
        f();
        FAIL() << "expected an exception containing '" << fragment << "'";
    } catch (const E& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

inline std::string temp_path(const std::string& name)
{
    return ::testing::TempDir() + name;
}

} // namespace summer::testing
