// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/bytes.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef DELTASCAN_FIXTURE_DIR
#error "DELTASCAN_FIXTURE_DIR must be defined"
#endif

namespace deltascan::testing
{
inline std::filesystem::path fixture_dir()
{
    return DELTASCAN_FIXTURE_DIR;
}

inline Bytes read_hex_fixture(const std::filesystem::path& p)
{
    std::ifstream in{p};
    std::stringstream ss;
    ss << in.rdbuf();
    return from_hex(ss.str());
}

/// Sorted list of the .hex files in a fixture subdirectory.
inline std::vector<std::filesystem::path> fixture_files(const std::string& sub)
{
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator{fixture_dir() / sub})
        if (e.path().extension() == ".hex")
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace deltascan::testing
