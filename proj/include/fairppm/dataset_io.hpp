#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairppm/encoding.hpp"

namespace fairppm {

// JSON-lines sample file: the first line is {"meta": {...}}, then one
// encoded prefix per line.
void write_samples(const std::filesystem::path& path, const std::vector<EncodedPrefix>& samples,
                   const nlohmann::json& meta);

struct SampleFile {
  nlohmann::json meta;
  std::vector<EncodedPrefix> samples;
};

// Throws ArtifactError when the file is missing or malformed.
SampleFile read_samples(const std::filesystem::path& path);

// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace fairppm
