#include "fairppm/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fairppm/error.hpp"

namespace fairppm {

double NumericFeature::scale(double v) const {
  if (kind == AttrKind::boolean) return v != 0.0 ? 1.0 : 0.0;
  if (!(max > min)) return 0.0;
  return std::clamp((v - min) / (max - min), 0.0, 1.0);
}

std::size_t EncoderSpec::input_width() const {
  std::size_t w = numeric.size();
  for (const auto& c : categorical) w += c.embedding_dim;
  return w;
}

std::size_t EncodedPrefix::length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

std::size_t embedding_dim_for(std::size_t vocab_size) {
  if (vocab_size == 0) return 1;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(vocab_size))));
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

double as_number(const AttrValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return 0.0;
}

const AttrValue* lookup(const AttrMap& m, const std::string& name) {
  auto it = m.find(name);
  return it == m.end() ? nullptr : &it->second;
}

}  // namespace

EncoderSpec fit_encoder(const std::vector<RawPrefixSample>& train, const Schema& schema, std::size_t max_len,
                        bool drop_sensitive, const std::string& sensitive_attr) {
  if (train.empty()) throw ConfigError("cannot fit an encoder on an empty training set");
  if (max_len == 0) throw ConfigError("max_len must be at least 1");

  EncoderSpec spec;
  spec.max_len = max_len;
  spec.drop_sensitive = drop_sensitive;
  spec.sensitive_attr = sensitive_attr;

  std::vector<std::string> cat_names{kActivityFeature}, num_names;
  for (bool statics : {false, true}) {
    for (const auto& [name, info] : schema) {
      if (info.is_static != statics) continue;
      if (drop_sensitive && name == sensitive_attr) continue;
      (info.kind == AttrKind::categorical ? cat_names : num_names).push_back(name);
    }
  }

  for (const auto& name : cat_names) {
    std::set<std::string> labels;
    const bool is_activity = name == kActivityFeature;
    const bool statics = !is_activity && is_static_attr(name);
    for (const auto& s : train) {
      if (statics) {
        if (const auto* v = lookup(s.static_attrs, name)) labels.insert(std::get<std::string>(*v));
        continue;
      }
      for (const auto& e : s.events) {
        if (is_activity) {
          labels.insert(e.activity);
        } else if (const auto* v = lookup(e.attrs, name)) {
          labels.insert(std::get<std::string>(*v));
        }
      }
    }
    CategoricalFeature f;
    f.name = name;
    int next = 1;
    for (const auto& l : labels) f.vocab[l] = next++;
    f.embedding_dim = embedding_dim_for(f.vocab.size());
    spec.categorical.push_back(std::move(f));
  }

  for (const auto& name : num_names) {
    const AttrInfo& info = schema.at(name);
    NumericFeature f;
    f.name = name;
    f.kind = info.kind;
    if (info.kind == AttrKind::boolean) {
      f.min = 0.0;
      f.max = 1.0;
    } else {
      Range r;
      for (const auto& s : train) {
        if (info.is_static) {
          if (const auto* v = lookup(s.static_attrs, name)) r.add(as_number(*v));
        } else {
          for (const auto& e : s.events)
            if (const auto* v = lookup(e.attrs, name)) r.add(as_number(*v));
        }
      }
      if (r.lo > r.hi) r.lo = r.hi = 0.0;
      f.min = r.lo;
      f.max = r.hi;
      if (!(f.max > f.min)) spec.warnings.push_back("numeric feature '" + name + "' is constant; encoded as 0");
    }
    spec.numeric.push_back(std::move(f));
  }
  return spec;
}

EncodedPrefix encode(const EncoderSpec& spec, const RawPrefixSample& sample) {
  const std::size_t L = sample.events.size();
  const std::size_t keep = std::min(L, spec.max_len);
  const std::size_t start = L - keep;

  EncodedPrefix out;
  out.y = sample.outcome;
  out.s = sample.sensitive;
  out.mask.assign(spec.max_len, 0);
  std::fill_n(out.mask.begin(), keep, std::uint8_t{1});
  out.cat.assign(spec.categorical.size(), std::vector<int>(spec.max_len, 0));
  out.num.assign(spec.numeric.size(), std::vector<double>(spec.max_len, 0.0));

  for (std::size_t f = 0; f < spec.categorical.size(); ++f) {
    const auto& feat = spec.categorical[f];
    const bool is_activity = feat.name == kActivityFeature;
    const bool statics = !is_activity && is_static_attr(feat.name);
    auto index_of = [&](const std::string& label) {
      auto it = feat.vocab.find(label);
      return it == feat.vocab.end() ? 0 : it->second;
    };
    int static_index = 0;
    if (statics) {
      if (const auto* v = lookup(sample.static_attrs, feat.name)) static_index = index_of(std::get<std::string>(*v));
    }
    for (std::size_t t = 0; t < keep; ++t) {
      const Event& e = sample.events[start + t];
      if (is_activity) {
        out.cat[f][t] = index_of(e.activity);
      } else if (statics) {
        out.cat[f][t] = static_index;
      } else if (const auto* v = lookup(e.attrs, feat.name)) {
        out.cat[f][t] = index_of(std::get<std::string>(*v));
      }
    }
  }

  for (std::size_t f = 0; f < spec.numeric.size(); ++f) {
    const auto& feat = spec.numeric[f];
    const bool statics = is_static_attr(feat.name);
    double static_value = 0.0;
    if (statics) {
      if (const auto* v = lookup(sample.static_attrs, feat.name)) static_value = feat.scale(as_number(*v));
    }
    for (std::size_t t = 0; t < keep; ++t) {
      if (statics) {
        out.num[f][t] = static_value;
      } else if (const auto* v = lookup(sample.events[start + t].attrs, feat.name)) {
        out.num[f][t] = feat.scale(as_number(*v));
      }
    }
  }
  return out;
}

std::vector<EncodedPrefix> encode_all(const EncoderSpec& spec, const std::vector<RawPrefixSample>& samples) {
  std::vector<EncodedPrefix> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode(spec, s));
  return out;
}

std::string decode_label(const CategoricalFeature& feature, int index) {
  for (const auto& [label, i] : feature.vocab)
    if (i == index) return label;
  return {};
}

nlohmann::json EncoderSpec::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categorical) {
    std::vector<std::string> labels(c.vocab.size());
    for (const auto& [label, i] : c.vocab) labels[static_cast<std::size_t>(i - 1)] = label;
    cats.push_back({{"name", c.name}, {"embedding_dim", c.embedding_dim}, {"labels", labels}});
  }
  nlohmann::json nums = nlohmann::json::array();
  for (const auto& n : numeric) {
    nums.push_back({{"name", n.name}, {"kind", std::string(fairppm::to_string(n.kind))}, {"min", n.min}, {"max", n.max}});
  }
  return {{"max_len", max_len},
          {"sensitive_attr", sensitive_attr},
          {"drop_sensitive", drop_sensitive},
          {"categorical", cats},
          {"numeric", nums}};
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
  EncoderSpec spec;
  try {
    spec.max_len = j.at("max_len").get<std::size_t>();
    spec.sensitive_attr = j.at("sensitive_attr").get<std::string>();
    spec.drop_sensitive = j.at("drop_sensitive").get<bool>();
    for (const auto& c : j.at("categorical")) {
      CategoricalFeature f;
      f.name = c.at("name").get<std::string>();
      f.embedding_dim = c.at("embedding_dim").get<std::size_t>();
      int next = 1;
      for (const auto& l : c.at("labels")) f.vocab[l.get<std::string>()] = next++;
      spec.categorical.push_back(std::move(f));
    }
    for (const auto& n : j.at("numeric")) {
      NumericFeature f;
      f.name = n.at("name").get<std::string>();
      f.kind = attr_kind_from_string(n.at("kind").get<std::string>());
      f.min = n.at("min").get<double>();
      f.max = n.at("max").get<double>();
      spec.numeric.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed encoder spec: ") + e.what());
  }
  return spec;
}

}  // namespace fairppm
