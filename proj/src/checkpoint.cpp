#include "fdavae/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fdavae/errors.hpp"

namespace fdavae {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'F', 'D', 'A', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* data, std::size_t len,
                    std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

json config_to_json(const ModelConfig& c) {
  return json{{"input_h", c.input_h},
              {"input_w", c.input_w},
              {"base_channels", c.base_channels},
              {"latent_channels", c.latent_channels},
              {"downsample_stages", c.downsample_stages},
              {"residual_blocks_per_coder", c.residual_blocks_per_coder},
              {"attention_blocks_per_coder", c.attention_blocks_per_coder},
              {"discriminator_stages", c.discriminator_stages},
              {"max_width_multiplier", c.max_width_multiplier}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_h = j.at("input_h").get<int>();
  c.input_w = j.at("input_w").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.latent_channels = j.at("latent_channels").get<int>();
  c.downsample_stages = j.at("downsample_stages").get<int>();
  c.residual_blocks_per_coder = j.at("residual_blocks_per_coder").get<int>();
  c.attention_blocks_per_coder = j.at("attention_blocks_per_coder").get<int>();
  c.discriminator_stages = j.at("discriminator_stages").get<int>();
  c.max_width_multiplier = j.at("max_width_multiplier").get<int>();
  return c;
}

void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(const std::string& buf, std::size_t& pos) {
  if (pos + 4 > buf.size()) throw CheckpointError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i]))
         << (8 * i);
  pos += 4;
  return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i]))
         << (8 * i);
  pos += 8;
  return v;
}

void append_tensor(std::string& buf, const Tensor& t) {
  buf.append(reinterpret_cast<const char*>(t.data.data()),
             t.size() * sizeof(float));
}

json tensor_manifest(const std::vector<ParamRef>& params) {
  json arr = json::array();
  for (const auto& p : params)
    arr.push_back(json{{"name", p.name},
                       {"dims", {p.value->n, p.value->c, p.value->h, p.value->w}}});
  return arr;
}

struct ParsedCheckpoint {
  json header;
  std::size_t payload_pos = 0;  // offset of first tensor byte
  std::string bytes;            // whole file
};

ParsedCheckpoint parse_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  ParsedCheckpoint pc;
  pc.bytes.assign(std::istreambuf_iterator<char>(f),
                  std::istreambuf_iterator<char>());
  if (pc.bytes.size() < 28 ||
      std::memcmp(pc.bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a checkpoint file: " + path);

  // Trailing 8 bytes hold the checksum of everything before them.
  const std::size_t body_len = pc.bytes.size() - 8;
  std::size_t pos = body_len;
  const std::uint64_t stored = read_u64(pc.bytes, pos);
  const std::uint64_t actual =
      fnv1a(reinterpret_cast<const unsigned char*>(pc.bytes.data()), body_len);
  if (stored != actual)
    throw CheckpointError("corrupt checkpoint (checksum mismatch): " + path);

  pos = sizeof(kMagic);
  const std::uint32_t version = read_u32(pc.bytes, pos);
  if (version != kVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " unsupported (expected " + std::to_string(kVersion) +
                          ")");
  const std::uint64_t header_len = read_u64(pc.bytes, pos);
  if (pos + header_len > body_len)
    throw CheckpointError("truncated checkpoint header: " + path);
  try {
    pc.header = json::parse(pc.bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError("bad checkpoint header: " + std::string(e.what()));
  }
  pc.payload_pos = pos + header_len;
  return pc;
}

CheckpointMeta meta_from_header(const json& h) {
  CheckpointMeta meta;
  meta.model = config_from_json(h.at("model"));
  meta.ablation = ablation_from_string(h.at("ablation").get<std::string>());
  meta.step = h.at("step").get<long>();
  meta.epoch = h.at("epoch").get<int>();
  meta.best_val_psnr = h.at("best_val_psnr").get<double>();
  meta.sample_rng_state = h.at("sample_rng").get<std::string>();
  meta.perce_seed = h.at("perce_seed").get<std::uint64_t>();
  return meta;
}

// Validates a stored manifest against a live registry; returns nothing,
// throws naming the first mismatch.
void check_manifest(const json& manifest, const std::vector<ParamRef>& params,
                    const char* what) {
  const std::size_t n = std::min<std::size_t>(manifest.size(), params.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string stored = manifest[i].at("name").get<std::string>();
    if (stored != params[i].name)
      throw CheckpointError(std::string(what) + ": parameter name mismatch at #" +
                            std::to_string(i) + ": checkpoint has '" + stored +
                            "', model has '" + params[i].name + "'");
    const auto dims = manifest[i].at("dims");
    const Tensor& t = *params[i].value;
    if (dims[0].get<int>() != t.n || dims[1].get<int>() != t.c ||
        dims[2].get<int>() != t.h || dims[3].get<int>() != t.w)
      throw CheckpointError(std::string(what) + ": shape mismatch for '" +
                            stored + "'");
  }
  if (manifest.size() > params.size())
    throw CheckpointError(std::string(what) + ": checkpoint has extra parameter '" +
                          manifest[params.size()].at("name").get<std::string>() +
                          "'");
  if (params.size() > manifest.size())
    throw CheckpointError(std::string(what) + ": checkpoint is missing parameter '" +
                          params[manifest.size()].name + "'");
}

void read_tensors(const std::string& bytes, std::size_t& pos,
                  const std::vector<Tensor*>& dst) {
  for (Tensor* t : dst) {
    const std::size_t len = t->size() * sizeof(float);
    if (pos + len > bytes.size() - 8)
      throw CheckpointError("truncated checkpoint payload");
    std::memcpy(t->data.data(), bytes.data() + pos, len);
    pos += len;
  }
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::backbone_only: return "backbone";
    case AblationMode::kl_fda: return "kl-fda";
    case AblationMode::full: return "full";
  }
  return "full";
}

AblationMode ablation_from_string(const std::string& s) {
  if (s == "backbone") return AblationMode::backbone_only;
  if (s == "kl-fda" || s == "kl_fda") return AblationMode::kl_fda;
  if (s == "full") return AblationMode::full;
  throw ConfigError("unknown ablation mode '" + s +
                    "' (expected backbone, kl-fda, or full)");
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     VaeModel& model, Adam* opt_gen, Adam* opt_disc) {
  auto params = model.params(ParamScope::all);

  json header;
  header["model"] = config_to_json(meta.model);
  header["ablation"] = to_string(meta.ablation);
  header["step"] = meta.step;
  header["epoch"] = meta.epoch;
  header["best_val_psnr"] = meta.best_val_psnr;
  header["sample_rng"] = meta.sample_rng_state;
  header["perce_seed"] = meta.perce_seed;
  header["params"] = tensor_manifest(params);
  header["has_optimizer"] = opt_gen != nullptr && opt_disc != nullptr;
  if (opt_gen && opt_disc) {
    header["adam_gen_t"] = opt_gen->t();
    header["adam_disc_t"] = opt_disc->t();
  }
  const std::string header_str = header.dump();

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  append_u32(buf, kVersion);
  append_u64(buf, header_str.size());
  buf.append(header_str);
  for (const auto& p : params) append_tensor(buf, *p.value);
  if (opt_gen && opt_disc) {
    for (auto* opt : {opt_gen, opt_disc}) {
      for (const Tensor& t : opt->moments_m()) append_tensor(buf, t);
      for (const Tensor& t : opt->moments_v()) append_tensor(buf, t);
    }
  }
  append_u64(buf, fnv1a(reinterpret_cast<const unsigned char*>(buf.data()),
                        buf.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint: " + tmp);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("checkpoint write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path);
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  return meta_from_header(parse_file(path).header);
}

CheckpointMeta load_checkpoint(const std::string& path, VaeModel& model,
                               Adam* opt_gen, Adam* opt_disc) {
  ParsedCheckpoint pc = parse_file(path);
  CheckpointMeta meta = meta_from_header(pc.header);

  if (!(meta.model == model.config()))
    throw CheckpointError(
        "checkpoint model config does not match the constructed model");

  auto params = model.params(ParamScope::all);
  check_manifest(pc.header.at("params"), params, "load_checkpoint");

  const bool want_opt = opt_gen != nullptr && opt_disc != nullptr;
  if (want_opt && !pc.header.value("has_optimizer", false))
    throw CheckpointError("checkpoint has no optimizer state");

  // All validation passed; now copy into the live tensors.
  std::size_t pos = pc.payload_pos;
  std::vector<Tensor*> dst;
  for (const auto& p : params) dst.push_back(p.value);
  read_tensors(pc.bytes, pos, dst);

  if (want_opt) {
    for (Adam* opt : {opt_gen, opt_disc}) {
      std::vector<Tensor*> mv;
      for (Tensor& t : opt->moments_m()) mv.push_back(&t);
      for (Tensor& t : opt->moments_v()) mv.push_back(&t);
      read_tensors(pc.bytes, pos, mv);
    }
    opt_gen->set_t(pc.header.at("adam_gen_t").get<long>());
    opt_disc->set_t(pc.header.at("adam_disc_t").get<long>());
  }
  return meta;
}

}  // namespace fdavae
