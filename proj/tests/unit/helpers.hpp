#pragma once

#include <filesystem>
#include <string>

#include "partc/pipeline.hpp"

namespace partc::test {

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(PARTC_TEST_DATA_DIR) / name;
}

inline std::string data_text(const std::string& name) { return read_file(data_path(name)); }

inline BuildArtifact build_data(const std::string& name) {
    return build_program(data_text(name), data_path(name).string());
}

/// Scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::path(PARTC_TEST_SCRATCH_DIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace partc::test
