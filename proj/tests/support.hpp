#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "reference.hpp"

namespace mp_test {

using namespace motionpred;

/// Fresh scratch directory under the system temp dir, unique per test case.
inline std::filesystem::path scratch_dir(const std::string& name) {
    std::string tag = name;
    if (const auto* info = ::testing::UnitTest::GetInstance()->current_test_info())
        tag += std::string("_") + info->test_suite_name() + "_" + info->name();
    auto p = std::filesystem::temp_directory_path() / ("motionpred_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace mp_test
