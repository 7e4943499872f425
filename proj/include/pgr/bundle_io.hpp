#pragma once

// Weight-bundle file format:
//
//   "PGWB"            4 bytes magic
//   version           u16 little-endian, = 1
//   header_length     u32 little-endian
//   header            canonical JSON (sorted keys, no whitespace)
//   payload           little-endian f32 arrays, weight then bias for every
//                     parameterised layer, in header layer order
//
// The header lists every layer of every stack with its spec and its payload
// byte length; the loader checks both against the rebuilt network before
// reading a single float.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgr/models.hpp"
#include "pgr/util.hpp"

namespace pgr::models {

using nlohmann::json;

inline constexpr char kBundleMagic[4] = {'P', 'G', 'W', 'B'};
inline constexpr std::uint16_t kBundleVersion = 1;

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline json layer_to_json(const LayerSpec& s) {
  json j;
  j["kind"] = std::string(nn::to_string(s.kind));
  j["in_channels"] = s.in_channels;
  j["out_channels"] = s.out_channels;
  j["kernel"] = s.kernel;
  j["stride"] = s.stride;
  j["padding"] = s.padding;
  j["output_padding"] = s.output_padding;
  j["target_shape"] = s.target_shape;
  return j;
}

inline LayerSpec layer_from_json(const json& j) {
  LayerSpec s;
  s.kind = nn::layer_kind_from_string(j.at("kind").get<std::string>());
  s.in_channels = j.at("in_channels").get<std::size_t>();
  s.out_channels = j.at("out_channels").get<std::size_t>();
  s.kernel = j.at("kernel").get<std::array<std::size_t, 2>>();
  s.stride = j.at("stride").get<std::array<std::size_t, 2>>();
  s.padding = j.at("padding").get<std::array<std::size_t, 2>>();
  s.output_padding = j.at("output_padding").get<std::size_t>();
  s.target_shape = j.at("target_shape").get<Shape>();
  return s;
}

inline json options_to_json(const ArchOptions& o) {
  return json{{"perc_channels", o.perc_channels}, {"perc_kernels", o.perc_kernels},
              {"perc_stride", o.perc_stride},     {"tabla_channels", o.tabla_channels},
              {"tabla_kernels", o.tabla_kernels}, {"tabla_stride", o.tabla_stride},
              {"tabla_dense", o.tabla_dense},     {"loc_hidden", o.loc_hidden},
              {"loc_from_encoder", o.loc_from_encoder}};
}

inline ArchOptions options_from_json(const json& j) {
  ArchOptions o;
  j.at("perc_channels").get_to(o.perc_channels);
  j.at("perc_kernels").get_to(o.perc_kernels);
  j.at("perc_stride").get_to(o.perc_stride);
  j.at("tabla_channels").get_to(o.tabla_channels);
  j.at("tabla_kernels").get_to(o.tabla_kernels);
  j.at("tabla_stride").get_to(o.tabla_stride);
  j.at("tabla_dense").get_to(o.tabla_dense);
  j.at("loc_hidden").get_to(o.loc_hidden);
  j.at("loc_from_encoder").get_to(o.loc_from_encoder);
  return o;
}

inline json training_to_json(const TrainingMeta& t) {
  return json{{"seed", t.seed},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"selection", t.selection},
              {"dataset_hash", t.dataset_hash},
              {"gamma", t.gamma},
              {"beta", t.beta},
              {"recon_reduction", t.recon_reduction},
              {"augmentation", t.augmentation},
              {"best_epoch", t.best_epoch},
              {"best_accuracy", t.best_accuracy}};
}

inline TrainingMeta training_from_json(const json& j) {
  TrainingMeta t;
  j.at("seed").get_to(t.seed);
  j.at("epochs").get_to(t.epochs);
  j.at("batch_size").get_to(t.batch_size);
  j.at("learning_rate").get_to(t.learning_rate);
  j.at("selection").get_to(t.selection);
  j.at("dataset_hash").get_to(t.dataset_hash);
  j.at("gamma").get_to(t.gamma);
  j.at("beta").get_to(t.beta);
  j.at("recon_reduction").get_to(t.recon_reduction);
  j.at("augmentation").get_to(t.augmentation);
  j.at("best_epoch").get_to(t.best_epoch);
  j.at("best_accuracy").get_to(t.best_accuracy);
  return t;
}

inline std::string feature_input_name(ArchitectureId a) { return a == ArchitectureId::tabla_cnn ? "mel80" : "fft64"; }

inline json bundle_header(const ModelBundle& b) {
  json layers = json::array();
  json stacks = json::object();
  const auto st = b.model.stacks();
  for (std::size_t si = 0; si < st.size(); ++si) {
    const auto& seq = *st[si];
    const std::string stack_name(Model<float>::kStackNames[si]);
    stacks[stack_name] = json{{"input_shape", seq.input_shape()}, {"layers", seq.size()}};
    for (std::size_t li = 0; li < seq.size(); ++li) {
      json l = layer_to_json(seq.spec(li));
      l["stack"] = stack_name;
      l["name"] = stack_name + "." + std::to_string(li);
      l["payload_bytes"] = (seq.weight(li).size() + seq.bias(li).size()) * sizeof(float);
      layers.push_back(std::move(l));
    }
  }
  json h;
  h["format"] = "pgr-weight-bundle";
  h["architecture_id"] = std::string(to_string(b.model.arch));
  h["head_config"] = json{{"n_cl", b.model.head.n_cl}, {"n_loc", b.model.head.n_loc}, {"n_emb", b.model.head.n_emb}};
  h["options"] = options_to_json(b.options);
  h["feature_metadata"] = json{{"input", feature_input_name(b.model.arch)},
                               {"window", b.features.windowed ? "hann" : "rectangular"},
                               {"log_floor", b.features.log_floor}};
  h["training_metadata"] = training_to_json(b.training);
  if (!b.projection.empty())
    h["projection"] = json{{"mean", b.projection.mean}, {"components", b.projection.components}};
  h["stacks"] = stacks;
  h["layers"] = layers;
  return h;
}

inline std::vector<std::uint8_t> serialize_bundle(const ModelBundle& b) {
  const std::string header = bundle_header(b).dump();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kBundleMagic, kBundleMagic + 4);
  util::put_le<std::uint16_t>(out, kBundleVersion);
  util::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto* seq : b.model.stacks()) {
    for (std::size_t li = 0; li < seq->size(); ++li) {
      for (float v : seq->weight(li).values) util::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
      for (float v : seq->bias(li).values) util::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  return out;
}

inline ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - off < n) throw FormatError(std::string("truncated bundle: missing ") + what, off);
  };
  need(4, "magic");
  if (std::memcmp(bytes.data(), kBundleMagic, 4) != 0) throw FormatError("bad magic, expected PGWB", 0);
  off = 4;
  need(2, "version");
  const auto version = util::get_le<std::uint16_t>(bytes.subspan(off));
  if (version != kBundleVersion)
    throw FormatError("unsupported bundle version " + std::to_string(version), off);
  off += 2;
  need(4, "header length");
  const auto hlen = util::get_le<std::uint32_t>(bytes.subspan(off));
  off += 4;
  need(hlen, "header");
  json h;
  try {
    h = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                    bytes.begin() + static_cast<std::ptrdiff_t>(off + hlen));
  } catch (const json::exception& e) {
    throw FormatError(std::string("header is not valid JSON: ") + e.what(), off);
  }
  const std::size_t header_off = off;
  off += hlen;

  ModelBundle b;
  std::vector<json> layer_entries;
  try {
    b.model.arch = architecture_from_string(h.at("architecture_id").get<std::string>());
    const auto& hc = h.at("head_config");
    b.model.head = HeadConfig{hc.at("n_cl").get<std::size_t>(), hc.at("n_loc").get<std::size_t>(),
                              hc.at("n_emb").get<std::size_t>()};
    b.model.head.validate(b.model.arch);
    b.options = options_from_json(h.at("options"));
    const auto& fm = h.at("feature_metadata");
    b.features.windowed = fm.at("window").get<std::string>() == "hann";
    b.features.log_floor = fm.at("log_floor").get<double>();
    if (fm.at("input").get<std::string>() != feature_input_name(b.model.arch))
      throw FormatError("feature input does not match architecture", header_off);
    b.training = training_from_json(h.at("training_metadata"));
    if (h.contains("projection")) {
      h["projection"].at("mean").get_to(b.projection.mean);
      h["projection"].at("components").get_to(b.projection.components);
      if (b.projection.components.size() != 2 * b.projection.mean.size())
        throw FormatError("projection components do not match its mean", header_off);
    }

    std::array<std::vector<LayerSpec>, 5> specs;
    for (const auto& l : h.at("layers")) {
      const std::string stack = l.at("stack").get<std::string>();
      std::size_t si = 0;
      while (si < 5 && Model<float>::kStackNames[si] != stack) ++si;
      if (si == 5) throw FormatError("layer names unknown stack '" + stack + "'", header_off);
      specs[si].push_back(layer_from_json(l));
      layer_entries.push_back(l);
    }
    auto st = b.model.stacks();
    for (std::size_t si = 0; si < 5; ++si) {
      const auto& sj = h.at("stacks").at(std::string(Model<float>::kStackNames[si]));
      *st[si] = Sequential<float>(sj.at("input_shape").get<Shape>(), specs[si]);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid header: ") + e.what(), header_off);
  }

  // Declared payload sizes must agree with the layer specs.
  std::size_t declared_total = 0;
  std::size_t li_global = 0;
  for (const auto* seq : b.model.stacks()) {
    for (std::size_t li = 0; li < seq->size(); ++li, ++li_global) {
      const auto& entry = layer_entries[li_global];
      const std::size_t expected = (seq->weight(li).size() + seq->bias(li).size()) * sizeof(float);
      const auto declared = entry.at("payload_bytes").get<std::size_t>();
      if (declared != expected)
        throw FormatError("layer " + entry.at("name").get<std::string>() + " declares " + std::to_string(declared) +
                              " payload bytes but its shape needs " + std::to_string(expected),
                          header_off);
      declared_total += declared;
    }
  }
  if (bytes.size() - off != declared_total)
    throw FormatError("payload holds " + std::to_string(bytes.size() - off) + " bytes, header declares " +
                          std::to_string(declared_total),
                      off);
  for (auto* seq : b.model.stacks()) {
    for (std::size_t li = 0; li < seq->size(); ++li) {
      for (auto* t : {&seq->weight(li), &seq->bias(li)}) {
        for (float& v : t->values) {
          v = std::bit_cast<float>(util::get_le<std::uint32_t>(bytes.subspan(off)));
          off += 4;
        }
      }
    }
  }
  return b;
}

inline void save_bundle(const ModelBundle& b, const std::string& path) {
  util::write_file_atomic(path, serialize_bundle(b));
}

inline ModelBundle load_bundle(const std::string& path) {
  return deserialize_bundle(util::read_file(path));
}

inline std::string bundle_hash(const ModelBundle& b) { return util::hex64(util::fnv1a64(serialize_bundle(b))); }

}  // namespace pgr::models
