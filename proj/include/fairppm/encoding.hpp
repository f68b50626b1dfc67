#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairppm/eventlog.hpp"

namespace fairppm {

// A categorical input channel (activity, dynamic or static categorical attribute).
// Index 0 is shared by padding and labels unseen during fitting.
struct CategoricalFeature {
  std::string name;
  std::map<std::string, int> vocab;  // label -> index >= 1
  std::size_t embedding_dim = 1;

  std::size_t vocab_size() const { return vocab.size(); }
  bool operator==(const CategoricalFeature&) const = default;
};

// A numeric or boolean channel. Numeric values are min-max scaled with the
// training range and clamped to [0,1]; booleans map to 0/1 as-is.
struct NumericFeature {
  std::string name;
  AttrKind kind = AttrKind::numeric;
  double min = 0.0;
  double max = 0.0;
  bool operator==(const NumericFeature&) const = default;

  double scale(double v) const;
};

inline constexpr const char* kActivityFeature = "activity";

struct EncoderSpec {
  std::size_t max_len = 6;
  std::string sensitive_attr;
  bool drop_sensitive = false;
  std::vector<CategoricalFeature> categorical;
  std::vector<NumericFeature> numeric;
  // Non-fatal notes produced while fitting (constant features); not serialized.
  std::vector<std::string> warnings;

  std::size_t input_width() const;  // embedding dims + numeric channels per timestep
  nlohmann::json to_json() const;
  static EncoderSpec from_json(const nlohmann::json& j);
  bool operator==(const EncoderSpec& o) const {
    return max_len == o.max_len && sensitive_attr == o.sensitive_attr && drop_sensitive == o.drop_sensitive &&
           categorical == o.categorical && numeric == o.numeric;
  }
};

// Fixed-length tensors for one prefix. cat[f][t] and num[f][t] index features
// in EncoderSpec order; mask[t] marks real events as a contiguous block from 0.
struct EncodedPrefix {
  std::vector<std::vector<int>> cat;
  std::vector<std::vector<double>> num;
  std::vector<std::uint8_t> mask;
  int y = 0;
  int s = 0;

  std::size_t length() const;
  bool operator==(const EncodedPrefix&) const = default;
};

// Vocabularies and ranges come from `train` only. Feature order: activity,
// dynamic categorical attributes, static categorical attributes (each group
// sorted by name); numeric channels likewise dynamic then static.
EncoderSpec fit_encoder(const std::vector<RawPrefixSample>& train, const Schema& schema, std::size_t max_len,
                        bool drop_sensitive, const std::string& sensitive_attr);

EncodedPrefix encode(const EncoderSpec& spec, const RawPrefixSample& sample);
std::vector<EncodedPrefix> encode_all(const EncoderSpec& spec, const std::vector<RawPrefixSample>& samples);

// Reverse vocabulary lookup; index 0 decodes to an empty string.
std::string decode_label(const CategoricalFeature& feature, int index);

}  // namespace fairppm
