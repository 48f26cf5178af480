#include "support/fixtures.hpp"

#include "mosaic/error.hpp"
#include "mosaic/text_util.hpp"

#include <cstdlib>
#include <filesystem>

namespace mosaic::testing {

namespace fs = std::filesystem;

std::string fixture_path(const std::string& name) { return (fs::path(MOSAIC_FIXTURE_DIR) / name).string(); }

std::string read_fixture(const std::string& name) { return read_file(fixture_path(name)); }

ScratchDir::ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "mosaic-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error(ErrorKind::IoError, "mkdtemp failed");
    path_ = tmpl;
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string ScratchDir::file(const std::string& name) const { return (fs::path(path_) / name).string(); }

} // namespace mosaic::testing
