#include "hffn/network.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace hffn {

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (scale < 2 || scale > 4) problems.push_back("scale must be 2, 3 or 4");
  if (channels < 4 || channels % 4 != 0) problems.push_back("channels must be a positive multiple of 4");
  if (n_lffb < 1) problems.push_back("n_lffb must be >= 1");
  if (m_hffb < 1) problems.push_back("m_hffb must be >= 1");
  if (cca_reduction < 1) {
    problems.push_back("cca_reduction must be >= 1");
  } else if (channels >= 4) {
    if (ablation.lffb && channels % cca_reduction != 0) {
      problems.push_back("channels must be divisible by cca_reduction");
    }
    if (ablation.lfde && ablation.lfde_cca && (channels / 4) % cca_reduction != 0) {
      problems.push_back("channels/4 (LFDE width) must be divisible by cca_reduction");
    }
  }
  if (problems.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& p : problems) msg += " " + p + ";";
  msg.pop_back();
  throw ConfigError(msg);
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "scale=" << scale << " channels=" << channels << " n_lffb=" << n_lffb
     << " m_hffb=" << m_hffb << " cca_reduction=" << cca_reduction
     << " ablation=" << ablation_name(ablation);
  return os.str();
}

std::uint64_t ModelConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Ablation parse_ablation(const std::string& spec) {
  Ablation ab;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty() || token == "none" || token == "full") continue;
    if (token == "no-hfe") {
      ab.hfe = false;
    } else if (token == "no-lfde") {
      ab.lfde = false;
    } else if (token == "no-lffb") {
      ab.lffb = false;
    } else if (token == "no-dsconv") {
      ab.dsconv = false;
    } else if (token == "no-cca") {
      ab.lfde_cca = false;
    } else {
      throw ConfigError("unknown ablation '" + token +
                        "' (expected no-hfe, no-lfde, no-lffb, no-dsconv, no-cca)");
    }
  }
  return ab;
}

std::string ablation_name(const Ablation& ab) {
  std::string out;
  auto add = [&](bool enabled, const char* name) {
    if (enabled) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(ab.hfe, "no-hfe");
  add(ab.lfde, "no-lfde");
  add(ab.lffb, "no-lffb");
  add(ab.dsconv, "no-dsconv");
  add(ab.lfde_cca, "no-cca");
  return out.empty() ? "full" : out;
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  LayerBuilder b(m.params_, m.layers_, seed);
  const int c = config.channels;
  const int r = config.cca_reduction;

  m.sfe_ = ConvLayer::create(b, "sfe", 3, c, 3);
  if (config.ablation.lffb) {
    for (int i = 0; i < config.n_lffb; ++i) {
      auto scope = b.scope("lffb" + std::to_string(i));
      m.lffbs_.push_back(LFFB::create(b, c, config.m_hffb, r, config.ablation, i * config.m_hffb));
    }
  } else {
    auto scope = b.scope("chain");
    for (int k = 0; k < config.n_lffb * config.m_hffb; ++k) {
      m.chain_.push_back(HFFB::create(b, c, r, config.ablation, k));
    }
  }
  {
    auto scope = b.scope("global_fuse");
    m.global_fuse_ = ConvLayer::create(b, "conv1x1", config.n_lffb * c, c, 1);
    m.global_refine_ = ConvLayer::create(b, "conv3x3", c, c, 3);
  }
  m.head_ = ReconstructionHead::create(b, "head", c, config.scale);
  return m;
}

std::vector<const HFFB*> Model::hffbs() const {
  std::vector<const HFFB*> out;
  for (const LFFB& l : lffbs_) {
    for (const HFFB& h : l.blocks) out.push_back(&h);
  }
  for (const HFFB& h : chain_) out.push_back(&h);
  return out;
}

std::size_t Model::hffb_count() const { return hffbs().size(); }

Tensor Model::forward(const Tensor& lr, Observer observer) const {
  Tensor out = forward(EagerContext(params_, std::move(observer)), lr);
  out.require_finite("forward output");
  return out;
}

Tensor Model::self_ensemble_forward(const Tensor& lr) const {
  Tensor acc;
  for (int k = 0; k < 8; ++k) {
    Tensor y = ops::dihedral_inverse(forward(ops::dihedral(lr, k)), k);
    acc = k == 0 ? std::move(y) : ops::add(acc, y);
  }
  return ops::scale(acc, 1.0 / 8.0);
}

namespace {

std::string prefix_of(const std::string& path, std::size_t depth) {
  std::size_t pos = 0;
  for (std::size_t d = 0; d < depth; ++d) {
    pos = path.find('.', pos);
    if (pos == std::string::npos) return path;
    ++pos;
  }
  return path.substr(0, pos - 1);
}

void accumulate(std::vector<ParamGroup>& groups, const std::string& key, std::size_t n) {
  for (ParamGroup& g : groups) {
    if (g.path == key) {
      g.count += n;
      return;
    }
  }
  groups.push_back({key, n});
}

}  // namespace

ParamBreakdown Model::param_count() const {
  ParamBreakdown out;
  const auto blocks = hffbs();
  std::string first_hffb;
  if (!blocks.empty()) {
    const std::string& name = params_.name(blocks.front()->entry.weight);
    first_hffb = name.substr(0, name.find(".entry."));
  }
  for (ParamId i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    const std::size_t n = params_[i].size();
    out.total += n;
    out.tensors.push_back({name, n});
    accumulate(out.modules, prefix_of(name, 1), n);
    if (!first_hffb.empty() && name.starts_with(first_hffb + ".")) {
      const std::string rest = name.substr(first_hffb.size() + 1);
      accumulate(out.hffb_parts, prefix_of(rest, 1), n);
    }
  }
  return out;
}

std::uint64_t Model::multi_adds(int out_h, int out_w) const {
  if (out_h <= 0 || out_w <= 0 || out_h % config_.scale != 0 || out_w % config_.scale != 0) {
    throw ConfigError("multi_adds: output size " + std::to_string(out_w) + "x" +
                      std::to_string(out_h) + " is not divisible by scale " +
                      std::to_string(config_.scale));
  }
  const int h = out_h / config_.scale;
  const int w = out_w / config_.scale;
  std::uint64_t total = 0;
  for (const LayerInfo& l : layers_) total += l.macs(h, w);
  return total;
}

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& buf, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void save_weights(const Model& model, const std::filesystem::path& path) {
  const std::size_t count = model.params().scalar_count();
  std::string buf;
  buf.reserve(kWeightHeaderBytes + 4 * count);
  buf.append("HFFN", 4);
  put_u32(buf, kWeightFileVersion);
  put_u64(buf, model.config().fingerprint());
  put_u64(buf, count);
  for (const Tensor& t : model.params().values()) {
    for (double v : t.data()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightFileError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw WeightFileError("failed writing " + path.string());
}

Model load_weights(const ModelConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError("cannot open weight file " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "weight file " + path.string() + ": ";
  if (buf.size() < kWeightHeaderBytes) throw WeightFileError(where + "truncated header");
  if (buf.compare(0, 4, "HFFN") != 0) throw WeightFileError(where + "bad magic");
  const auto version = get_le(buf, 4, 4);
  if (version != kWeightFileVersion) {
    throw WeightFileError(where + "unsupported version " + std::to_string(version));
  }
  if (get_le(buf, 8, 8) != config.fingerprint()) {
    throw WeightFileError(where + "config fingerprint mismatch; file was not written for '" +
                          config.canonical() + "'");
  }
  Model model = Model::build(config, 0);
  const std::uint64_t count = get_le(buf, 16, 8);
  if (count != model.params().scalar_count()) {
    throw WeightFileError(where + "parameter count " + std::to_string(count) + " != expected " +
                          std::to_string(model.params().scalar_count()));
  }
  if (buf.size() != kWeightHeaderBytes + 4 * count) {
    throw WeightFileError(where + (buf.size() < kWeightHeaderBytes + 4 * count
                                       ? "truncated parameter data"
                                       : "trailing bytes after parameter data"));
  }
  std::size_t offset = kWeightHeaderBytes;
  for (Tensor& t : model.params().values()) {
    for (double& v : t.data()) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(buf, offset, 4)));
      offset += 4;
    }
  }
  return model;
}

}  // namespace hffn
