#include "fairppm/dataset_io.hpp"

#include <fstream>

#include "fairppm/error.hpp"

namespace fairppm {

void write_samples(const std::filesystem::path& path, const std::vector<EncodedPrefix>& samples,
                   const nlohmann::json& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << nlohmann::json{{"meta", meta}}.dump() << '\n';
  for (const auto& s : samples) {
    out << nlohmann::json{{"cat", s.cat}, {"num", s.num}, {"mask", s.mask}, {"y", s.y}, {"s", s.s}}.dump() << '\n';
  }
}

SampleFile read_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing sample file " + path.string());
  SampleFile file;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        file.meta = j.at("meta");
        continue;
      }
      EncodedPrefix p;
      p.cat = j.at("cat").get<std::vector<std::vector<int>>>();
      p.num = j.at("num").get<std::vector<std::vector<double>>>();
      p.mask = j.at("mask").get<std::vector<std::uint8_t>>();
      p.y = j.at("y").get<int>();
      p.s = j.at("s").get<int>();
      file.samples.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
  }
  if (line_no == 0) throw ArtifactError(path.string() + " is empty");
  return file;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("unreadable JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace fairppm
