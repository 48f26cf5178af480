#pragma once

#include <string>

namespace mosaic::testing {

std::string fixture_path(const std::string& name);
std::string read_fixture(const std::string& name);

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    ScratchDir();
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const;

private:
    std::string path_;
};

} // namespace mosaic::testing
