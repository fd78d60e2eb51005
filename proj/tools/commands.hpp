#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "splat/codec.hpp"
#include "splat/initializer.hpp"
#include "splat/pipeline.hpp"
#include "splat/types.hpp"

namespace splat::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitNumerical = 3,
};

struct EncodeArgs {
  std::string input;
  std::string output;
  std::string manifest;  // defaults to <output>.json
  double cr = 50.0;
  EncoderConfig config;
  InitVariant variant = InitVariant::kFull;
  CodecMode mode = CodecMode::kQuantized;
  bool verbose = false;
  std::string loss_csv;
  std::string dump_weights;
  std::string dump_samples;
};

struct DecodeArgs {
  std::string input;
  std::string output;
  double scale = 1.0;
  int threads = 0;
  CompositeMode composite = CompositeMode::kAlphaBlend;
};

struct EvalArgs {
  std::string original;
  std::string reconstruction;
  bool csv = false;
};

struct AblateArgs {
  std::string input;
  double cr = 200.0;
  EncoderConfig config;
  std::vector<InitVariant> variants = {InitVariant::kRandom, InitVariant::kMeans,
                                       InitVariant::kMeansScales, InitVariant::kFull};
  bool csv = false;
};

const char* variant_name(InitVariant v);
std::optional<InitVariant> parse_variant(const std::string& name);

// Human-readable JSON report of an encode run.
std::string manifest_json(const EncodeArgs& args, const EncodeResult& result);

int cmd_encode(const EncodeArgs& args, std::ostream& out);
int cmd_decode(const DecodeArgs& args, std::ostream& out);
int cmd_eval(const EvalArgs& args, std::ostream& out);
int cmd_ablate(const AblateArgs& args, std::ostream& out);

// Parses argv and dispatches; errors are reported on `err` and mapped to
// ExitCode values.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splat::cli
