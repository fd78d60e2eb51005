#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include "splat/budget.hpp"
#include "splat/features.hpp"
#include "splat/image_io.hpp"
#include "splat/metrics.hpp"
#include "splat/renderer.hpp"

namespace splat::cli {
namespace {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableImage, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kUnreadableImage, "cannot write " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::kUnreadableImage, "cannot write " + path);
}

// Per-pixel max of the tile weight maps over the whole canvas.
ScalarMap weight_overview(const ImageBuffer& image, const EncoderConfig& config,
                          const TilePlan& plan) {
  ScalarMap full(image.height(), image.width());
  for (const Tile& tile : plan.tiles) {
    const WeightMap wm = tile_weights(image, tile, config.lambda_m, config.variance_window);
    for (int r = 0; r < tile.height; ++r) {
      for (int c = 0; c < tile.width; ++c) {
        double& v = full.at(tile.row0 + r, tile.col0 + c);
        v = std::max(v, wm.weights.at(r, c));
      }
    }
  }
  return full;
}

// Dimmed source with variational samples in red, uniform in blue and
// degraded uniform samples in yellow.
ImageBuffer sample_overlay(const ImageBuffer& image, const std::vector<SamplePoint>& samples) {
  ImageBuffer out = image;
  for (auto& v : out.data()) v *= 0.5;
  for (const auto& s : samples) {
    const int c0 = static_cast<int>(std::floor(s.x));
    const int r0 = static_cast<int>(std::floor(s.y));
    Color color{1.0f, 0.0f, 0.0f};
    if (s.kind == SampleKind::kUniform) {
      color = s.degraded ? Color{1.0f, 1.0f, 0.0f} : Color{0.2f, 0.4f, 1.0f};
    }
    for (int r = r0 - 1; r <= r0 + 1; ++r) {
      for (int c = c0 - 1; c <= c0 + 1; ++c) {
        if (r < 0 || c < 0 || r >= out.height() || c >= out.width()) continue;
        for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = color[ch];
      }
    }
  }
  return out;
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "null";
  std::ostringstream s;
  s << std::setprecision(6) << *v;
  return s.str();
}

void add_encoder_flags(CLI::App& app, EncoderConfig& config, double& cr) {
  app.add_option("--cr", cr, "Target compression ratio")->check(CLI::PositiveNumber);
  app.add_option("--iters", config.iterations, "Optimization steps")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", config.seed, "Random seed");
  app.add_option("--threads", config.threads, "Worker threads (0 = hardware)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--lambda-m", config.lambda_m, "Gradient vs variance weight")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--lambda-g", config.lambda_g, "Variational sample fraction")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--lambda-l", config.lambda_l, "L1 vs SSIM loss weight")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--tile-size", config.tile_size, "Sampling tile size in pixels")
      ->check(CLI::PositiveNumber);
  app.add_option("--k", config.k_neighbors, "Neighbors for uniform-sample scales")
      ->check(CLI::PositiveNumber);
  app.add_option("--variance-window", config.variance_window, "Odd variance window side");
  app.add_option("--lr-means", config.learning_rates.means);
  app.add_option("--lr-scales", config.learning_rates.scales);
  app.add_option("--lr-colors", config.learning_rates.colors);
  app.add_option("--lr-thetas", config.learning_rates.thetas);
}

const std::map<std::string, CompositeMode> kCompositeNames = {
    {"alpha", CompositeMode::kAlphaBlend}, {"additive", CompositeMode::kAdditive}};

}  // namespace

const char* variant_name(InitVariant v) {
  switch (v) {
    case InitVariant::kRandom: return "random";
    case InitVariant::kMeans: return "means";
    case InitVariant::kMeansScales: return "scales";
    case InitVariant::kFull: return "full";
  }
  return "unknown";
}

std::optional<InitVariant> parse_variant(const std::string& name) {
  for (auto v : {InitVariant::kRandom, InitVariant::kMeans, InitVariant::kMeansScales,
                 InitVariant::kFull}) {
    if (name == variant_name(v)) return v;
  }
  return std::nullopt;
}

std::string manifest_json(const EncodeArgs& args, const EncodeResult& result) {
  using nlohmann::json;
  const EncoderConfig& c = args.config;
  json j;
  j["input"] = args.input;
  j["output"] = args.output;
  j["config"] = {
      {"cr", args.cr},
      {"lambda_m", c.lambda_m},
      {"lambda_g", c.lambda_g},
      {"lambda_l", c.lambda_l},
      {"k_neighbors", c.k_neighbors},
      {"tile_size", c.tile_size},
      {"variance_window", c.variance_window},
      {"iterations", c.iterations},
      {"learning_rates",
       {{"means", c.learning_rates.means},
        {"scales", c.learning_rates.scales},
        {"colors", c.learning_rates.colors},
        {"thetas", c.learning_rates.thetas}}},
      {"seed", c.seed},
      {"init", variant_name(args.variant)},
      {"mode", args.mode == CodecMode::kQuantized ? "quant" : "float"},
  };
  j["budget"] = {{"n_g", result.budget.n_g},
                 {"n_vs", result.budget.n_vs},
                 {"n_us", result.budget.n_us},
                 {"s_base", result.budget.s_base}};
  j["timings_seconds"] = {{"init", result.timings.init_seconds},
                          {"train", result.timings.train_seconds},
                          {"encode", result.timings.encode_seconds}};
  j["file_bytes"] = result.file.size();
  j["nominal_ratio"] = result.nominal_ratio;
  j["achieved_ratio"] = result.achieved_ratio;
  j["quality"] = {{"psnr", result.quality.psnr}, {"ssim", result.quality.ssim}};
  j["quality"]["ms_ssim"] =
      result.quality.ms_ssim ? json(*result.quality.ms_ssim) : json(nullptr);
  if (!result.state.loss_history.empty()) {
    j["loss"] = {{"initial", result.state.loss_history.front()},
                 {"final", result.state.loss_history.back()}};
  }
  return j.dump(2) + "\n";
}

int cmd_encode(const EncodeArgs& args, std::ostream& out) {
  const ImageBuffer image = read_image(args.input);

  TrainOptions topts;
  if (args.verbose) {
    out << "step,loss,psnr\n";
    topts.on_progress = [&out](int step, double loss, double db) {
      out << step << ',' << std::setprecision(8) << loss << ',' << db << '\n';
    };
  }
  const EncodeResult result =
      encode_image(image, args.cr, args.config, args.variant, args.mode, topts);

  write_bytes(args.output, result.file);
  const std::string manifest = args.manifest.empty() ? args.output + ".json" : args.manifest;
  write_text(manifest, manifest_json(args, result));

  if (!args.loss_csv.empty()) {
    std::ostringstream csv;
    csv << "step,loss\n" << std::setprecision(10);
    for (std::size_t s = 0; s < result.state.loss_history.size(); ++s) {
      csv << s << ',' << result.state.loss_history[s] << '\n';
    }
    write_text(args.loss_csv, csv.str());
  }
  if (!args.dump_weights.empty()) {
    write_png_gray(args.dump_weights, weight_overview(image, args.config, result.init.plan));
  }
  if (!args.dump_samples.empty()) {
    write_png(args.dump_samples, sample_overlay(image, result.init.samples));
  }

  out << "primitives: " << result.budget.n_g << " (" << result.budget.n_vs << " variational, "
      << result.budget.n_us << " uniform)\n"
      << "file: " << args.output << " (" << result.file.size() << " bytes)\n"
      << std::fixed << std::setprecision(2) << "ratio: nominal " << result.nominal_ratio
      << ", achieved " << result.achieved_ratio << "\n"
      << "psnr: " << result.quality.psnr << " dB, ssim: " << std::setprecision(4)
      << result.quality.ssim << "\n"
      << std::setprecision(2) << "time: init " << result.timings.init_seconds << " s, train "
      << result.timings.train_seconds << " s\n";
  return kExitOk;
}

int cmd_decode(const DecodeArgs& args, std::ostream& out) {
  const std::vector<std::uint8_t> bytes = read_bytes(args.input);
  const DecodedFile file = decode_file(bytes);
  if (!(args.scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "--scale must be > 0");
  }
  const int height = std::max(1, static_cast<int>(std::lround(file.height * args.scale)));
  const int width = std::max(1, static_cast<int>(std::lround(file.width * args.scale)));
  const GaussianSet set = args.scale == 1.0 ? file.set : rescale(file.set, args.scale);

  RenderOptions ropts;
  ropts.threads = args.threads;
  ropts.mode = args.composite;
  const auto start = std::chrono::steady_clock::now();
  const RenderOutput rendered = render(set, height, width, ropts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_png(args.output, rendered.image);

  out << "decoded " << file.set.size() << " primitives to " << width << "x" << height << " "
      << args.output << "\n"
      << std::fixed << std::setprecision(4) << "decode time: " << seconds << " s ("
      << std::setprecision(2) << (seconds > 0.0 ? 1.0 / seconds : 0.0) << " fps)\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const ImageBuffer a = read_image(args.original);
  const ImageBuffer b = read_image(args.reconstruction);
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kShapeMismatch, "images differ in size");
  }
  const QualityReport q = evaluate_quality(a, b);
  if (args.csv) {
    out << "psnr,ssim,ms_ssim\n"
        << std::setprecision(6) << q.psnr << ',' << q.ssim << ','
        << (q.ms_ssim ? format_optional(q.ms_ssim) : std::string("ssim_fallback")) << '\n';
    return kExitOk;
  }
  out << std::fixed << std::setprecision(4) << "PSNR: " << q.psnr << " dB\n"
      << "SSIM: " << q.ssim << "\n";
  if (q.ms_ssim) {
    out << "MS-SSIM: " << *q.ms_ssim << "\n";
  } else {
    out << "MS-SSIM: n/a (image smaller than " << kMsSsimMinSide << " px, use SSIM)\n";
  }
  return kExitOk;
}

int cmd_ablate(const AblateArgs& args, std::ostream& out) {
  const ImageBuffer image = read_image(args.input);
  struct Row {
    InitVariant variant;
    EncodeResult result;
  };
  std::vector<Row> rows;
  for (InitVariant v : args.variants) {
    rows.push_back({v, encode_image(image, args.cr, args.config, v, CodecMode::kFloat32)});
  }
  if (args.csv) {
    out << "variant,psnr,ssim,ms_ssim,train_seconds\n";
    for (const auto& r : rows) {
      out << variant_name(r.variant) << ',' << std::setprecision(6) << r.result.quality.psnr << ','
          << r.result.quality.ssim << ',' << format_optional(r.result.quality.ms_ssim) << ','
          << r.result.timings.train_seconds << '\n';
    }
    return kExitOk;
  }
  out << std::left << std::setw(10) << "variant" << std::right << std::setw(10) << "PSNR"
      << std::setw(10) << "SSIM" << std::setw(10) << "MS-SSIM" << std::setw(12) << "train s"
      << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << variant_name(r.variant) << std::right << std::fixed
        << std::setprecision(2) << std::setw(10) << r.result.quality.psnr << std::setprecision(4)
        << std::setw(10) << r.result.quality.ssim << std::setw(10)
        << (r.result.quality.ms_ssim ? *r.result.quality.ms_ssim : std::nan(""))
        << std::setprecision(1) << std::setw(12) << r.result.timings.train_seconds << '\n';
  }
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian-splat image codec"};
  app.require_subcommand(1);

  EncodeArgs enc;
  std::string init_name = "smart";
  std::string mode_name = "quant";
  std::string composite_name = "alpha";
  auto* encode = app.add_subcommand("encode", "Fit primitives to an image and write .ssplat");
  encode->add_option("input", enc.input, "Input PNG or PPM")->required();
  encode->add_option("-o,--output", enc.output, "Output .ssplat path")->required();
  encode->add_option("--manifest", enc.manifest, "Manifest path (default <output>.json)");
  add_encoder_flags(*encode, enc.config, enc.cr);
  encode->add_option("--init", init_name, "smart | random | means | scales")
      ->check(CLI::IsMember({"smart", "random", "means", "scales", "full"}));
  encode->add_option("--mode", mode_name, "Payload encoding")
      ->check(CLI::IsMember({"float", "quant"}));
  encode->add_option("--composite", composite_name)->check(CLI::IsMember({"alpha", "additive"}));
  encode->add_flag("-v,--verbose", enc.verbose, "Print step,loss,psnr CSV progress");
  encode->add_option("--loss-csv", enc.loss_csv, "Write the per-step loss history");
  encode->add_option("--dump-weights", enc.dump_weights, "Write the sampling weight map PNG");
  encode->add_option("--dump-samples", enc.dump_samples, "Write the sample overlay PNG");

  DecodeArgs dec;
  std::string dec_composite = "alpha";
  auto* decode = app.add_subcommand("decode", "Render a .ssplat file to PNG");
  decode->add_option("input", dec.input, "Input .ssplat")->required();
  decode->add_option("-o,--output", dec.output, "Output PNG")->required();
  decode->add_option("--scale", dec.scale, "Canvas scale factor")->check(CLI::PositiveNumber);
  decode->add_option("--threads", dec.threads)->check(CLI::NonNegativeNumber);
  decode->add_option("--composite", dec_composite)->check(CLI::IsMember({"alpha", "additive"}));

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Compare two images");
  eval->add_option("original", ev.original)->required();
  eval->add_option("reconstruction", ev.reconstruction)->required();
  eval->add_flag("--csv", ev.csv, "Machine-readable output");

  AblateArgs ab;
  std::vector<std::string> variant_names;
  auto* ablate = app.add_subcommand("ablate", "Compare initialization variants");
  ablate->add_option("input", ab.input)->required();
  add_encoder_flags(*ablate, ab.config, ab.cr);
  ablate->add_option("--variants", variant_names, "Subset of random,means,scales,full")
      ->delimiter(',')
      ->check(CLI::IsMember({"random", "means", "scales", "full"}));
  ablate->add_flag("--csv", ab.csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*encode) {
      enc.variant = init_name == "smart" ? InitVariant::kFull : *parse_variant(init_name);
      enc.mode = mode_name == "float" ? CodecMode::kFloat32 : CodecMode::kQuantized;
      enc.config.composite = kCompositeNames.at(composite_name);
      enc.config.validate();
      return cmd_encode(enc, out);
    }
    if (*decode) {
      dec.composite = kCompositeNames.at(dec_composite);
      return cmd_decode(dec, out);
    }
    if (*eval) return cmd_eval(ev, out);
    if (*ablate) {
      if (!variant_names.empty()) {
        ab.variants.clear();
        for (const auto& n : variant_names) ab.variants.push_back(*parse_variant(n));
      }
      ab.config.validate();
      return cmd_ablate(ab, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kNonFiniteLoss: return kExitNumerical;
      case ErrorCode::kInvalidArgument: return kExitUsage;
      default: return kExitInput;
    }
  }
  return kExitUsage;
}

}  // namespace splat::cli
