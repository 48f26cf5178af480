#pragma once

#include "mosaic/codebook.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

// Canonical sub-agent order; routing output and reports follow it.
const std::vector<std::string>& canonical_codebook_names();

// Human-facing name ("Patient Behavior", "SDOH & Weight").
std::string codebook_display_name(std::string_view name);

// Source documents for the shipped codebooks, keyed by canonical name.
std::string_view builtin_codebook_doc(std::string_view name);

std::vector<Codebook> builtin_codebooks();

} // namespace mosaic
