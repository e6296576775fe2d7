#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace test {

inline std::pair<double, double> mean_and_stddev(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::string fixture(const std::string& name)
{
    return std::string(PUFSIM_FIXTURE_DIR) + "/" + name;
}

// A fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("pufsim-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test
