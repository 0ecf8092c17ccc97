// hffn: model summary, super-resolution, evaluation, frequency decomposition
// and toy training from the command line.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hffn/image.hpp"
#include "hffn/metrics.hpp"
#include "hffn/network.hpp"
#include "hffn/training.hpp"

namespace fs = std::filesystem;
using namespace hffn;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  int scale = 4;
  int channels = 48;
  int n_lffb = 6;
  int m_hffb = 5;
  int cca_reduction = 4;
  std::string ablation = "full";

  void attach(CLI::App* app) {
    app->add_option("--scale", scale, "Upscaling factor (2, 3 or 4)");
    app->add_option("--channels", channels, "Feature channels C");
    app->add_option("--n-lffb", n_lffb, "Number of LFFBs");
    app->add_option("--m-hffb", m_hffb, "HFFBs per LFFB");
    app->add_option("--cca-reduction", cca_reduction, "CCA bottleneck ratio");
    app->add_option("--ablation", ablation,
                    "Comma list of no-hfe, no-lfde, no-lffb, no-dsconv, no-cca");
  }

  ModelConfig config() const {
    ModelConfig c;
    c.scale = scale;
    c.channels = channels;
    c.n_lffb = n_lffb;
    c.m_hffb = m_hffb;
    c.cca_reduction = cca_reduction;
    c.ablation = parse_ablation(ablation);
    c.validate();
    return c;
  }
};

void print_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "config: command=" << command;
  for (const auto& [k, v] : kv) std::cout << ' ' << k << '=' << v;
  std::cout << std::endl;
}

std::string fmt_count(std::uint64_t n) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << static_cast<double>(n) / 1e3 << "K";
  return os.str();
}

std::pair<int, int> parse_resolution(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream is(s);
  if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || w <= 0 || h <= 0 || !is.eof()) {
    throw UsageError("--out-res expects WxH, got '" + s + "'");
  }
  return {w, h};
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no PNG images in " + dir.string());
  return out;
}

Image require_rgb(Image im, const fs::path& path) {
  if (im.channels() == 3) return im;
  if (im.channels() != 1) throw DataError(path.string() + ": unsupported channel count");
  Tensor t(Shape{1, 3, im.height(), im.width()});
  for (int c = 0; c < 3; ++c) std::copy_n(im.pixels.ptr(), im.pixels.size(), t.plane(0, c));
  return Image{std::move(t), ColorSpace::rgb};
}

// ---------------------------------------------------------------- summary

int cmd_summary(const ModelFlags& flags, const std::string& out_res, const std::string& json_path) {
  const ModelConfig config = flags.config();
  const auto [w, h] = parse_resolution(out_res);
  print_config("summary", {{"model", "[" + config.canonical() + "]"}, {"out_res", out_res}});

  const Model model = Model::build(config, 0);
  const ParamBreakdown pb = model.param_count();
  const auto blocks = model.hffbs();
  std::cout << "topology: sfe -> ";
  if (config.ablation.lffb) {
    std::cout << config.n_lffb << " LFFB x " << config.m_hffb << " HFFB";
  } else {
    std::cout << "flat chain of " << blocks.size() << " HFFBs (tap every " << config.m_hffb << ")";
  }
  std::cout << " -> global fuse -> head (x" << config.scale << ")\n";

  std::cout << "parameters by module:\n";
  for (const ParamGroup& g : pb.modules) {
    std::cout << "  " << std::left << std::setw(14) << g.path << std::right << std::setw(10)
              << g.count << '\n';
  }
  std::cout << "parameters per HFFB part (first block):\n";
  for (const ParamGroup& g : pb.hffb_parts) {
    std::cout << "  " << std::left << std::setw(14) << g.path << std::right << std::setw(10)
              << g.count << '\n';
  }
  std::cout << "total parameters: " << pb.total << " (" << fmt_count(pb.total) << ")\n";

  nlohmann::json j;
  j["config"] = config.canonical();
  j["total_params"] = pb.total;
  j["hffb_count"] = blocks.size();
  for (const ParamGroup& g : pb.modules) j["modules"][g.path] = g.count;
  for (const ParamGroup& g : pb.hffb_parts) j["hffb_parts"][g.path] = g.count;
  j["out_res"] = out_res;
  try {
    const std::uint64_t macs = model.multi_adds(h, w);
    std::cout << "multi-adds at " << out_res << ": " << macs << " ("
              << std::fixed << std::setprecision(2) << static_cast<double>(macs) / 1e9
              << "G)\n";
    j["multi_adds"] = macs;
  } catch (const ConfigError& e) {
    std::cout << "multi-adds at " << out_res << ": n/a (" << e.what() << ")\n";
    j["multi_adds"] = nullptr;
  }
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw DataError("cannot write " + json_path);
    out << j.dump(2) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- sr

int cmd_sr(const ModelFlags& flags, const std::string& weights, const std::string& input,
           const std::string& output, bool self_ensemble) {
  const ModelConfig config = flags.config();
  print_config("sr", {{"model", "[" + config.canonical() + "]"},
                      {"weights", weights},
                      {"input", input},
                      {"output", output},
                      {"self_ensemble", self_ensemble ? "on" : "off"}});
  const Model model = load_weights(config, weights);
  const Image lr = require_rgb(load_png(input), input);
  const Tensor sr = self_ensemble ? model.self_ensemble_forward(lr.pixels) : model.forward(lr.pixels);
  save_png(Image::from_tensor(sr, ColorSpace::rgb), output);
  std::cout << "wrote " << output << " (" << sr.width() << "x" << sr.height() << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const ModelFlags& flags, const std::string& weights, bool identity,
             const std::string& hr_dir, const std::string& report_path) {
  if (identity == !weights.empty()) {
    throw UsageError("eval needs exactly one of --weights or --identity-model");
  }
  const int s = flags.scale;
  std::optional<Model> model;
  std::string model_desc;
  if (identity) {
    if (s < 1 || s > 4) throw UsageError("--scale must be in 1..4 for the identity model");
    model_desc = "identity(bicubic) scale=" + std::to_string(s);
  } else {
    const ModelConfig config = flags.config();
    model_desc = config.canonical();
    model.emplace(load_weights(config, weights));
  }
  print_config("eval", {{"model", "[" + model_desc + "]"},
                        {"weights", identity ? "none" : weights},
                        {"hr_dir", hr_dir},
                        {"shave", std::to_string(s)},
                        {"report", report_path.empty() ? "none" : report_path}});

  EvalReport report;
  report.dataset = fs::path(hr_dir).filename().string();
  if (report.dataset.empty()) report.dataset = fs::path(hr_dir).parent_path().filename().string();
  report.scale = s;
  for (const fs::path& p : list_pngs(hr_dir)) {
    const ImagePair pair = make_pair(require_rgb(load_png(p), p), s, p.filename().string());
    Image sr = identity ? bicubic_resize(pair.lr, Rational{s, 1})
                        : Image::from_tensor(model->forward(pair.lr.pixels), ColorSpace::rgb);
    report.per_image.push_back(score_y(pair.name, sr, pair.hr, s));
  }
  report.finalize();
  std::cout << report.to_text();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw DataError("cannot write " + report_path);
    out << report.to_json() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- decompose

int cmd_decompose(const ModelFlags& flags, const std::string& weights, const std::string& input,
                  int block, const std::string& prefix) {
  const ModelConfig config = flags.config();
  print_config("decompose", {{"model", "[" + config.canonical() + "]"},
                             {"weights", weights},
                             {"input", input},
                             {"block", std::to_string(block)},
                             {"out_prefix", prefix}});
  const Model model = load_weights(config, weights);
  if (block < 0 || static_cast<std::size_t>(block) >= model.hffb_count()) {
    throw UsageError("--block " + std::to_string(block) + " out of range [0, " +
                     std::to_string(model.hffb_count()) + ")");
  }
  const Image image = require_rgb(load_png(input), input);
  const Decomposition d = decompose(image, model, block);
  const std::string low = prefix + "_low.png", high = prefix + "_high.png",
                    meta = prefix + "_meta.json";
  save_png(d.low_map, low);
  save_png(d.high_map, high);
  nlohmann::json j;
  j["block"] = block;
  j["width"] = image.width();
  j["height"] = image.height();
  j["high_max_abs"] = d.high_max_abs;
  j["high_map_zero"] = d.high_max_abs == 0.0;
  std::ofstream(meta) << j.dump(2) << '\n';
  std::cout << "wrote " << low << ", " << high << ", " << meta << '\n';
  if (d.high_max_abs == 0.0) std::cout << "note: high-frequency map is uniformly zero\n";
  return kOk;
}

// ---------------------------------------------------------------- train-toy

std::vector<ImagePair> load_training_pairs(const std::string& dir, int scale, int patch) {
  std::vector<ImagePair> pairs;
  std::vector<std::string> offenders;
  for (const fs::path& p : list_pngs(dir)) {
    try {
      Image hr = require_rgb(load_png(p), p);
      if (hr.height() / scale < patch || hr.width() / scale < patch) {
        offenders.push_back(p.filename().string() + " (" + std::to_string(hr.width()) + "x" +
                            std::to_string(hr.height()) + " too small for LR patch " +
                            std::to_string(patch) + ")");
        continue;
      }
      pairs.push_back(make_pair(hr, scale, p.filename().string()));
    } catch (const std::exception& e) {
      offenders.push_back(p.filename().string() + " (" + e.what() + ")");
    }
  }
  if (!offenders.empty()) {
    std::string msg = "unusable training images:";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw DataError(msg);
  }
  return pairs;
}

int cmd_train_toy(const ModelFlags& flags, const TrainConfig& tc, const std::string& data_dir,
                  int synthetic, const std::string& out_weights, const std::string& curve,
                  const std::string& plot, std::uint64_t init_seed) {
  const ModelConfig config = flags.config();
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (data_dir.empty() == (synthetic == 0)) {
    throw UsageError("train-toy needs exactly one of --data-dir or --synthetic N");
  }
  print_config("train-toy",
               {{"model", "[" + config.canonical() + "]"},
                {"train", "[" + tc.canonical() + "]"},
                {"init_seed", std::to_string(init_seed)},
                {"data", data_dir.empty() ? "synthetic:" + std::to_string(synthetic) : data_dir},
                {"out_weights", out_weights},
                {"curve", curve.empty() ? "none" : curve}});
  const std::vector<ImagePair> pairs =
      data_dir.empty() ? synthetic_pairs(synthetic, 2 * tc.patch * config.scale, config.scale, tc.seed)
                       : load_training_pairs(data_dir, config.scale, tc.patch);
  Model model = Model::build(config, init_seed);
  const int every = std::max(1, tc.steps / 10);
  const TrainResult result = train_toy(model, pairs, tc, [&](int step, double loss) {
    if (step % every == 0 || step + 1 == tc.steps) {
      std::cout << "step " << step << " loss " << std::setprecision(6) << loss << std::endl;
    }
  });
  save_weights(model, out_weights);
  if (!curve.empty()) write_loss_csv(result.loss_curve, curve);
  if (!plot.empty()) save_png(render_loss_plot(result.loss_curve), plot);
  const std::size_t window = std::min<std::size_t>(25, result.loss_curve.size());
  std::cout << "smoothed loss: first " << head_mean(result.loss_curve, window) << " last "
            << tail_mean(result.loss_curve, window) << " (window " << window << ")\n";
  std::cout << "wrote " << out_weights << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HFFN super-resolution toolkit"};
  app.require_subcommand(1);

  ModelFlags summary_flags;
  std::string out_res = "1280x720", summary_json;
  auto* summary = app.add_subcommand("summary", "Parameter breakdown and Multi-Adds");
  summary_flags.attach(summary);
  summary->add_option("--out-res", out_res, "HR output resolution WxH for Multi-Adds");
  summary->add_option("--json", summary_json, "Also write the summary as JSON");

  ModelFlags sr_flags;
  std::string sr_weights, sr_input, sr_output;
  bool self_ensemble = false;
  auto* sr = app.add_subcommand("sr", "Super-resolve one PNG");
  sr_flags.attach(sr);
  sr->add_option("--weights", sr_weights)->required();
  sr->add_option("--input", sr_input)->required();
  sr->add_option("--output", sr_output)->required();
  sr->add_flag("--self-ensemble", self_ensemble, "Average over the 8 flips/rotations");

  ModelFlags eval_flags;
  std::string eval_weights, hr_dir, report_path;
  bool identity = false;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM on a directory of HR PNGs");
  eval_flags.attach(eval);
  eval->add_option("--weights", eval_weights);
  eval->add_flag("--identity-model", identity, "Bicubic upscaling instead of a network");
  eval->add_option("--hr-dir", hr_dir)->required();
  eval->add_option("--report", report_path, "JSON report path");

  ModelFlags dec_flags;
  std::string dec_weights, dec_input, dec_prefix;
  int dec_block = 0;
  auto* dec = app.add_subcommand("decompose", "Low/high frequency maps of one HFFB");
  dec_flags.attach(dec);
  dec->add_option("--weights", dec_weights)->required();
  dec->add_option("--input", dec_input)->required();
  dec->add_option("--block", dec_block, "HFFB index in execution order");
  dec->add_option("--out-prefix", dec_prefix)->required();

  // Toy-sized defaults keep CPU runs short.
  ModelFlags train_flags;
  train_flags.scale = 2;
  train_flags.channels = 16;
  train_flags.n_lffb = 2;
  train_flags.m_hffb = 2;
  TrainConfig tc;
  std::string data_dir, out_weights, curve, plot;
  int synthetic = 0;
  std::uint64_t init_seed = 1;
  auto* train = app.add_subcommand("train-toy", "Short L1/Adam training run");
  train_flags.attach(train);
  train->add_option("--data-dir", data_dir, "Directory of HR PNGs");
  train->add_option("--synthetic", synthetic, "Use N generated images instead of --data-dir");
  train->add_option("--steps", tc.steps);
  train->add_option("--batch", tc.batch);
  train->add_option("--patch", tc.patch, "LR patch size");
  train->add_option("--lr", tc.lr_init);
  train->add_option("--seed", tc.seed, "Sampling seed");
  train->add_option("--init-seed", init_seed, "Weight initialization seed");
  train->add_flag("!--no-augment", tc.augment, "Disable flips/rotations");
  train->add_option("--out-weights", out_weights)->required();
  train->add_option("--curve", curve, "Loss curve CSV");
  train->add_option("--plot", plot, "Loss curve PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*summary) return cmd_summary(summary_flags, out_res, summary_json);
    if (*sr) return cmd_sr(sr_flags, sr_weights, sr_input, sr_output, self_ensemble);
    if (*eval) return cmd_eval(eval_flags, eval_weights, identity, hr_dir, report_path);
    if (*dec) return cmd_decompose(dec_flags, dec_weights, dec_input, dec_block, dec_prefix);
    if (*train) {
      return cmd_train_toy(train_flags, tc, data_dir, synthetic, out_weights, curve, plot,
                           init_seed);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
