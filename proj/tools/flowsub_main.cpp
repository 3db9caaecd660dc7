// flowsub command-line tool: basis generation, subspace projection,
// synthetic scenes, motion analysis, gradient checks, depth metrics,
// seed segmentation and flow visualization.
//
// Exit codes: 0 success, 1 internal/numeric failure, 2 usage or input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowsub/basis.hpp"
#include "flowsub/core.hpp"
#include "flowsub/embedding.hpp"
#include "flowsub/gradients.hpp"
#include "flowsub/io.hpp"
#include "flowsub/metrics.hpp"
#include "flowsub/motion.hpp"
#include "flowsub/projection.hpp"
#include "flowsub/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowsub;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalOptions {
  std::uint64_t seed = 7;
  int threads = 1;
  bool quiet = false;
};

GlobalOptions g_options;

void note(const std::string& line) {
  if (!g_options.quiet) std::cout << line << "\n";
}

// Every command records its inputs, parameters and outputs next to what it
// wrote, so a run can be reproduced from the record alone.
struct RunManifest {
  std::string command;
  json inputs = json::object();
  json parameters = json::object();
  json outputs = json::array();

  void add_output(const fs::path& path) { outputs.push_back(path.string()); }

  void write(const fs::path& path) const {
    json manifest;
    manifest["command"] = command;
    manifest["inputs"] = inputs;
    manifest["parameters"] = parameters;
    manifest["outputs"] = outputs;
    manifest["versions"] = {{"flowsub", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)}};
    manifest["seed"] = g_options.seed;
    manifest["threads"] = g_options.threads;
    io::write_file_atomic(path, manifest.dump(2) + "\n");
  }
};

std::vector<double> parse_doubles(const std::string& text, size_t count, const char* what) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw std::invalid_argument(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (values.size() != count) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(count) +
                                " comma-separated values");
  }
  return values;
}

Intrinsics parse_intrinsics(const std::string& text) {
  const auto v = parse_doubles(text, 4, "--intrinsics");
  Intrinsics K{v[0], v[1], v[2], v[3]};
  require_valid(K);
  return K;
}

CameraMotion parse_motion(const std::string& text, const char* what) {
  const auto v = parse_doubles(text, 6, what);
  CameraMotion motion;
  motion.translation = Eigen::Vector3d(v[0], v[1], v[2]);
  motion.rotation = Eigen::Vector3d(v[3], v[4], v[5]);
  return motion;
}

ImageShape parse_shape(const std::string& text) {
  const auto sep = text.find('x');
  if (sep == std::string::npos) {
    throw std::invalid_argument("--shape: expected HxW");
  }
  try {
    const ImageShape shape{std::stoi(text.substr(0, sep)), std::stoi(text.substr(sep + 1))};
    require_valid(shape);
    return shape;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("--shape: expected HxW");
  }
}

json motion_to_json(const CameraMotion& motion) {
  return {{"translation",
           {motion.translation.x(), motion.translation.y(), motion.translation.z()}},
          {"rotation", {motion.rotation.x(), motion.rotation.y(), motion.rotation.z()}}};
}

ScalarField magnitude_field(const FlowField& flow) {
  ScalarField out = constant_field(flow.shape, 0.0);
  for (int p = 0; p < flow.shape.pixel_count(); ++p) {
    out.values[p] = std::hypot(flow.data[2 * p], flow.data[2 * p + 1]);
  }
  return out;
}

// --- basis ---------------------------------------------------------------

struct BasisArgs {
  std::string disparity_path;
  std::string intrinsics_text;
  bool unknown_focal = false;
  std::string pp_text;
  std::string embedding_dir;
  int embed_dim = 0;
  bool renormalize_embedding = false;
  bool object_rotations = false;
  std::string out_dir;
};

int run_basis(const BasisArgs& args) {
  if (args.unknown_focal == !args.intrinsics_text.empty()) {
    throw std::invalid_argument("give exactly one of --intrinsics or --unknown-focal with --pp");
  }

  BasisConfig config;
  config.known_focal = !args.unknown_focal;
  if (config.known_focal) {
    config.intrinsics = parse_intrinsics(args.intrinsics_text);
  } else {
    if (args.pp_text.empty()) {
      throw std::invalid_argument("--unknown-focal requires --pp cx,cy");
    }
    const auto pp = parse_doubles(args.pp_text, 2, "--pp");
    config.intrinsics = Intrinsics{1.0, 1.0, pp[0], pp[1]};
  }
  config.object_rotations = args.object_rotations;

  const ScalarField raw = io::read_pfm(args.disparity_path);
  const DisparityMap disparity(raw.shape, raw.values);
  const PixelGrid grid = make_grid(disparity.shape);

  std::optional<ObjectEmbedding> phi;
  if (!args.embedding_dir.empty()) {
    phi = io::read_embedding(args.embedding_dir, args.renormalize_embedding);
    if (args.embed_dim > 0 && args.embed_dim != phi->dim) {
      throw std::invalid_argument("--A " + std::to_string(args.embed_dim) +
                                  " does not match the embedding stack dimension " +
                                  std::to_string(phi->dim));
    }
  }

  const FlowBasis basis = build_basis(grid, config, disparity, phi ? &*phi : nullptr);

  io::BasisStackInfo info;
  info.family = phi ? (config.known_focal ? "embedding-known-focal" : "embedding-unknown-focal")
                    : (config.known_focal ? "camera-known-focal" : "camera-unknown-focal");
  info.embed_dim = phi ? phi->dim : 0;
  info.disparity_median = median(disparity.values);
  io::write_basis(args.out_dir, basis, info);

  RunManifest manifest;
  manifest.command = "basis";
  manifest.inputs["disparity"] = args.disparity_path;
  if (!args.embedding_dir.empty()) manifest.inputs["embedding"] = args.embedding_dir;
  manifest.parameters["family"] = info.family;
  manifest.parameters["embed_dim"] = info.embed_dim;
  manifest.parameters["object_rotations"] = args.object_rotations;
  if (config.known_focal) {
    manifest.parameters["intrinsics"] = {config.intrinsics.fx, config.intrinsics.fy,
                                         config.intrinsics.cx, config.intrinsics.cy};
  } else {
    manifest.parameters["principal_point"] = {config.intrinsics.cx, config.intrinsics.cy};
  }
  manifest.add_output(fs::path(args.out_dir) / "basis.json");
  manifest.write(fs::path(args.out_dir) / "run_manifest.json");

  std::cout << basis.size() << " basis fields written to " << args.out_dir << "\n";
  return 0;
}

// --- project -------------------------------------------------------------

struct ProjectArgs {
  std::string basis_dir;
  std::string flow_path;
  double epsilon = kDefaultSingularThreshold;
  bool relative_threshold = false;
  std::string camera_basis_dir;
  double camera_weight = 0.5;
  double full_weight = 1.0;
  std::string out_dir;
};

int run_project(const ProjectArgs& args) {
  const io::LoadedBasis loaded = io::read_basis(args.basis_dir);
  const FlowField flow = io::read_flo(args.flow_path);
  const ThresholdMode mode =
      args.relative_threshold ? ThresholdMode::Relative : ThresholdMode::Absolute;

  const SubspaceProjector projector = orthonormalize(assemble(loaded.basis), args.epsilon, mode);
  const ProjectionResult result = project(projector, flow);

  std::cout << "loss " << result.residual_norm << "\n";
  note("rank " + std::to_string(result.rank) + " of " +
       std::to_string(result.singular_values.size()) + " columns");

  json record;
  record["loss"] = result.residual_norm;
  record["rank"] = result.rank;
  record["rank_deficient"] = result.rank_deficient;
  record["singular_values"] =
      std::vector<double>(result.singular_values.data(),
                          result.singular_values.data() + result.singular_values.size());
  record["coefficients"] = json::object();
  for (size_t j = 0; j < result.labels.size(); ++j) {
    record["coefficients"][result.labels[j]] = result.coefficients[static_cast<Eigen::Index>(j)];
  }

  if (!args.camera_basis_dir.empty()) {
    const io::LoadedBasis camera = io::read_basis(args.camera_basis_dir);
    const double camera_loss = flow_reconstruction_loss(camera.basis, flow, args.epsilon);
    const double total =
        args.camera_weight * camera_loss + args.full_weight * result.residual_norm;
    std::cout << "camera-only loss " << camera_loss << "\n";
    std::cout << "weighted total " << total << "\n";
    record["camera_loss"] = camera_loss;
    record["weighted_total"] = total;
    record["weights"] = {{"camera", args.camera_weight}, {"full", args.full_weight}};
  }

  if (!args.out_dir.empty()) {
    const fs::path out(args.out_dir);
    io::write_flo(out / "reconstructed.flo", result.reconstructed);
    FlowField residual = flow;
    residual.data -= result.reconstructed.data;
    io::write_pfm(out / "residual.pfm", magnitude_field(residual));
    io::write_file_atomic(out / "projection.json", record.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "project";
    manifest.inputs["basis"] = args.basis_dir;
    manifest.inputs["flow"] = args.flow_path;
    if (!args.camera_basis_dir.empty()) {
      manifest.inputs["camera_basis"] = args.camera_basis_dir;
      manifest.parameters["camera_weight"] = args.camera_weight;
      manifest.parameters["full_weight"] = args.full_weight;
    }
    manifest.parameters["epsilon"] = args.epsilon;
    manifest.parameters["threshold_mode"] = args.relative_threshold ? "relative" : "absolute";
    manifest.add_output(out / "reconstructed.flo");
    manifest.add_output(out / "residual.pfm");
    manifest.add_output(out / "projection.json");
    manifest.write(out / "run_manifest.json");
  }
  return 0;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string scene = "cube";
  std::string shape_text = "64x64";
  std::string intrinsics_text;
  std::string motion_text;
  std::vector<std::string> object_motion_texts;
  double step = kDefaultMotionStep;
  std::string out_dir;
};

int run_synth(const SynthArgs& args) {
  const ImageShape shape = parse_shape(args.shape_text);
  Intrinsics K{static_cast<double>(std::min(shape.height, shape.width)),
               static_cast<double>(std::min(shape.height, shape.width)), shape.width / 2.0,
               shape.height / 2.0};
  if (!args.intrinsics_text.empty()) K = parse_intrinsics(args.intrinsics_text);

  Scene scene;
  if (args.scene == "cube") {
    scene = cube_scene(shape, K);
  } else if (args.scene == "plane") {
    scene = plane_scene(shape, K);
  } else if (args.scene == "two-objects") {
    scene = two_object_scene(shape, K);
  } else {
    throw std::invalid_argument("--scene must be cube, plane or two-objects");
  }
  if (!args.motion_text.empty()) {
    scene.camera_motion = parse_motion(args.motion_text, "--motion");
  }
  if (args.object_motion_texts.size() > scene.objects.size()) {
    throw std::invalid_argument("more --object-motion entries than scene objects (" +
                                std::to_string(scene.objects.size()) + ")");
  }
  for (size_t i = 0; i < args.object_motion_texts.size(); ++i) {
    scene.objects[i].motion = parse_motion(args.object_motion_texts[i], "--object-motion");
  }

  const FlowField exact = reproject_flow(scene, args.step);
  const FlowField instant = instantaneous_flow(scene);

  const fs::path out(args.out_dir);
  io::write_pfm(out / "depth.pfm", scene.depth);
  io::write_pfm(out / "disparity.pfm", ScalarField(scene.shape, scene.disparity().values));
  io::write_flo(out / "flow_exact.flo", exact);
  io::write_flo(out / "flow_instant.flo", instant);

  json record;
  record["scene"] = args.scene;
  record["height"] = shape.height;
  record["width"] = shape.width;
  record["intrinsics"] = {K.fx, K.fy, K.cx, K.cy};
  record["step"] = args.step;
  record["camera_motion"] = motion_to_json(scene.camera_motion);
  record["objects"] = json::array();
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "mask_%02zu.pgm", i);
    io::write_mask(out / buffer, scene.objects[i].mask);
    record["objects"].push_back(
        {{"mask", buffer}, {"motion", motion_to_json(scene.objects[i].motion)}});
  }
  io::write_file_atomic(out / "scene.json", record.dump(2) + "\n");

  RunManifest manifest;
  manifest.command = "synth";
  manifest.parameters = record;
  manifest.add_output(out / "depth.pfm");
  manifest.add_output(out / "disparity.pfm");
  manifest.add_output(out / "flow_exact.flo");
  manifest.add_output(out / "flow_instant.flo");
  manifest.add_output(out / "scene.json");
  manifest.write(out / "run_manifest.json");

  note("scene '" + args.scene + "' written to " + args.out_dir);
  return 0;
}

// --- analyze -------------------------------------------------------------

struct AnalyzeArgs {
  std::string basis_dir;
  std::string flow_path;
  double epsilon = kDefaultSingularThreshold;
  std::string out_path;
};

int run_analyze(const AnalyzeArgs& args) {
  const io::LoadedBasis loaded = io::read_basis(args.basis_dir);
  const FlowField flow = io::read_flo(args.flow_path);
  const ProjectionResult result =
      project(orthonormalize(assemble(loaded.basis), args.epsilon), flow);

  const bool known_focal = loaded.info.family.find("unknown") == std::string::npos;
  const bool embedding = loaded.info.family.rfind("embedding", 0) == 0;

  json record;
  record["family"] = loaded.info.family;
  record["loss"] = result.residual_norm;
  record["rank"] = result.rank;
  record["degenerate"] = result.rank_deficient;

  std::ostringstream report;
  report << "family            " << loaded.info.family << "\n";
  report << "loss              " << result.residual_norm << "\n";
  report << "rank              " << result.rank << " of " << result.singular_values.size()
         << (result.rank_deficient ? "  (degenerate: minimum-norm coefficients)" : "") << "\n";

  if (embedding) {
    if (loaded.info.embed_dim < 1) {
      throw std::invalid_argument("embedding basis manifest lacks embed_dim");
    }
    const Eigen::Vector3d rotation = recover_rotation(result, known_focal);
    const RecoveredObjectMotion object = recover_object_matrix(result, loaded.info.embed_dim);
    report << "camera rotation   (" << rotation.x() << ", " << rotation.y() << ", "
           << rotation.z() << ") rad/frame\n";
    report << "translation map (columns = embedding axes, rows = x/y/z):\n";
    for (int a = 0; a < 3; ++a) {
      report << "   ";
      for (int i = 0; i < loaded.info.embed_dim; ++i) report << " " << object.matrix(a, i);
      report << "\n";
    }
    record["rotation"] = {rotation.x(), rotation.y(), rotation.z()};
    record["object_matrix"] = json::array();
    for (int a = 0; a < 3; ++a) {
      json row = json::array();
      for (int i = 0; i < loaded.info.embed_dim; ++i) row.push_back(object.matrix(a, i));
      record["object_matrix"].push_back(row);
    }
  } else {
    const BasisFamily family =
        known_focal ? BasisFamily::CameraKnownFocal : BasisFamily::CameraUnknownFocal;
    const RecoveredMotion motion =
        recover_camera_motion(result, family, loaded.info.disparity_median);
    report << "camera rotation   (" << motion.camera.rotation.x() << ", "
           << motion.camera.rotation.y() << ", " << motion.camera.rotation.z()
           << ") rad/frame\n";
    report << "camera translation(" << motion.camera.translation.x() << ", "
           << motion.camera.translation.y() << ", " << motion.camera.translation.z()
           << ") per frame, up to the disparity scale\n";
    record["rotation"] = {motion.camera.rotation.x(), motion.camera.rotation.y(),
                          motion.camera.rotation.z()};
    record["translation"] = {motion.camera.translation.x(), motion.camera.translation.y(),
                             motion.camera.translation.z()};
    if (motion.disparity_median) {
      report << "disparity median  " << *motion.disparity_median
             << " (translation x median is scale-invariant)\n";
      record["disparity_median"] = *motion.disparity_median;
    }
    if (motion.focal) {
      report << "focal estimate    " << motion.focal->value << " (pair consistency "
             << motion.focal->consistency_ratio << ")\n";
      record["focal_estimate"] = motion.focal->value;
      record["focal_consistency"] = motion.focal->consistency_ratio;
    }
  }

  std::cout << report.str();
  if (!args.out_path.empty()) {
    io::write_file_atomic(args.out_path, record.dump(2) + "\n");
    RunManifest manifest;
    manifest.command = "analyze";
    manifest.inputs["basis"] = args.basis_dir;
    manifest.inputs["flow"] = args.flow_path;
    manifest.parameters["epsilon"] = args.epsilon;
    manifest.add_output(args.out_path);
    manifest.write(fs::path(args.out_path).string() + ".manifest.json");
  }
  return 0;
}

// --- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
  int trials = 20;
  int max_size = 12;
  double tolerance = 1e-4;
  double epsilon = kDefaultSingularThreshold;
};

int run_gradcheck(const GradcheckArgs& args) {
  GradientCheckOptions options;
  options.trials = args.trials;
  options.max_size = args.max_size;
  options.tolerance = args.tolerance;
  options.epsilon = args.epsilon;
  options.seed = g_options.seed;
  options.threads = g_options.threads;

  const GradientCheckSummary summary = gradient_check(options);
  std::cout << "max relative error " << summary.max_relative_error << " over "
            << summary.trials_run << " trials";
  if (summary.trials_skipped > 0) {
    std::cout << " (" << summary.trials_skipped << " skipped near the threshold guard band)";
  }
  std::cout << "\n";
  if (summary.failures > 0) {
    std::cout << summary.failures << " trials above tolerance; worst at trial "
              << summary.worst_trial << ", coordinate " << summary.worst_coordinate << "\n";
  }
  return summary.passed(args.tolerance) ? 0 : 1;
}

// --- metrics -------------------------------------------------------------

struct MetricsArgs {
  std::string pred_path;
  std::string gt_path;
  std::string mask_path;
  std::string alignment = "median";
  bool pred_is_disparity = false;
  bool gt_is_disparity = false;
  std::string out_path;
};

int run_metrics(const MetricsArgs& args) {
  const auto load_depth = [](const std::string& path, bool is_disparity) {
    const ScalarField raw = io::read_pfm(path);
    if (!is_disparity) return raw;
    return disparity_to_depth(DisparityMap(raw.shape, raw.values));
  };
  const ScalarField pred = load_depth(args.pred_path, args.pred_is_disparity);
  const ScalarField gt = load_depth(args.gt_path, args.gt_is_disparity);

  std::optional<ObjectMask> mask;
  if (!args.mask_path.empty()) mask = io::read_mask(args.mask_path);

  DepthAlignment alignment;
  if (args.alignment == "none") {
    alignment = DepthAlignment::None;
  } else if (args.alignment == "median") {
    alignment = DepthAlignment::MedianRatio;
  } else {
    throw std::invalid_argument("--alignment must be none or median");
  }

  const DepthEvalReport report = evaluate_depth(pred, gt, mask ? &*mask : nullptr, alignment);

  std::cout << "rel      log10    RMS      s1       s2       s3\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f\n", report.rel,
                report.log10, report.rms, report.sigma[0], report.sigma[1], report.sigma[2]);
  std::cout << line;
  note("pixels " + std::to_string(report.n_pixels) + ", scale " +
       std::to_string(report.scale_applied));

  if (!args.out_path.empty()) {
    json record;
    record["rel"] = report.rel;
    record["log10"] = report.log10;
    record["rms"] = report.rms;
    record["sigma"] = {report.sigma[0], report.sigma[1], report.sigma[2]};
    record["n_pixels"] = report.n_pixels;
    record["scale_applied"] = report.scale_applied;
    io::write_file_atomic(args.out_path, record.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "metrics";
    manifest.inputs["pred"] = args.pred_path;
    manifest.inputs["gt"] = args.gt_path;
    if (!args.mask_path.empty()) manifest.inputs["mask"] = args.mask_path;
    manifest.parameters["alignment"] = args.alignment;
    manifest.parameters["pred_is_disparity"] = args.pred_is_disparity;
    manifest.parameters["gt_is_disparity"] = args.gt_is_disparity;
    manifest.add_output(args.out_path);
    manifest.write(fs::path(args.out_path).string() + ".manifest.json");
  }
  return 0;
}

// --- segment -------------------------------------------------------------

struct SegmentArgs {
  std::string embedding_dir;
  std::string seeds_path;
  double lambda_spatial = 1.0;
  double lambda_embed = 10.0;
  std::string out_path;
  std::string png_path;
};

std::vector<SeedPoint> read_seeds(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open seed file " + path.string());
  }
  std::vector<SeedPoint> seeds;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream fields(line);
    SeedPoint seed;
    if (fields >> seed.label >> seed.u >> seed.v) {
      seeds.push_back(seed);
    } else if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw std::invalid_argument("seed file line " + std::to_string(line_number) +
                                  ": expected 'label u v'");
    }
  }
  return seeds;
}

int run_segment(const SegmentArgs& args) {
  const ObjectEmbedding phi = io::read_embedding(args.embedding_dir);
  const std::vector<SeedPoint> seeds = read_seeds(args.seeds_path);
  BilateralConfig config;
  config.lambda_spatial = args.lambda_spatial;
  config.lambda_embed = args.lambda_embed;

  const LabelMap labels = segment_from_seeds(phi, seeds, config);

  io::GrayImage image;
  image.shape = labels.shape;
  image.pixels.resize(static_cast<size_t>(labels.shape.pixel_count()));
  for (int p = 0; p < labels.shape.pixel_count(); ++p) {
    const int label = labels.labels[p];
    if (label < 0 || label > 255) {
      throw std::invalid_argument("labels must fit 8-bit PGM output (got " +
                                  std::to_string(label) + ")");
    }
    image.pixels[static_cast<size_t>(p)] = static_cast<std::uint8_t>(label);
  }
  io::write_pgm(args.out_path, image);

  if (!args.png_path.empty()) {
    // Fixed palette keyed by label so colors are stable across runs.
    io::RgbImage rgb;
    rgb.shape = labels.shape;
    rgb.pixels.resize(static_cast<size_t>(labels.shape.pixel_count()) * 3);
    for (int p = 0; p < labels.shape.pixel_count(); ++p) {
      const unsigned label = static_cast<unsigned>(labels.labels[p]);
      rgb.pixels[3 * static_cast<size_t>(p)] = static_cast<std::uint8_t>(97 * (label + 1));
      rgb.pixels[3 * static_cast<size_t>(p) + 1] = static_cast<std::uint8_t>(57 * (label + 2));
      rgb.pixels[3 * static_cast<size_t>(p) + 2] = static_cast<std::uint8_t>(31 * (label + 3));
    }
    io::write_png(args.png_path, rgb);
  }

  RunManifest manifest;
  manifest.command = "segment";
  manifest.inputs["embedding"] = args.embedding_dir;
  manifest.inputs["seeds"] = args.seeds_path;
  manifest.parameters["lambda_spatial"] = args.lambda_spatial;
  manifest.parameters["lambda_embed"] = args.lambda_embed;
  manifest.add_output(args.out_path);
  if (!args.png_path.empty()) manifest.add_output(args.png_path);
  manifest.write(fs::path(args.out_path).string() + ".manifest.json");

  note("label map written to " + args.out_path);
  return 0;
}

// --- colorize ------------------------------------------------------------

struct ColorizeArgs {
  std::string flow_path;
  double max_magnitude = 0.0;  // 0 = auto
  std::string out_path;
};

int run_colorize(const ColorizeArgs& args) {
  const FlowField flow = io::read_flo(args.flow_path);
  std::optional<double> max_mag;
  if (args.max_magnitude > 0.0) max_mag = args.max_magnitude;
  io::write_png(args.out_path, io::colorize_flow(flow, max_mag));

  RunManifest manifest;
  manifest.command = "colorize";
  manifest.inputs["flow"] = args.flow_path;
  manifest.parameters["max_magnitude"] =
      args.max_magnitude > 0.0 ? json(args.max_magnitude) : json("auto");
  manifest.add_output(args.out_path);
  manifest.write(fs::path(args.out_path).string() + ".manifest.json");

  note("visualization written to " + args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowsub: flow subspace construction, projection and analysis"};
  app.require_subcommand(1);
  app.add_option("--seed", g_options.seed, "seed for randomized commands");
  app.add_option("--threads", g_options.threads, "worker threads where supported")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g_options.quiet, "suppress informational output");

  BasisArgs basis_args;
  auto* basis_cmd = app.add_subcommand("basis", "generate a flow basis stack");
  basis_cmd->add_option("--disparity", basis_args.disparity_path, "disparity map (PFM)")
      ->required();
  basis_cmd->add_option("--intrinsics", basis_args.intrinsics_text, "fx,fy,cx,cy");
  basis_cmd->add_flag("--unknown-focal", basis_args.unknown_focal,
                      "use the 8-field unknown-focal family");
  basis_cmd->add_option("--pp", basis_args.pp_text, "principal point cx,cy");
  basis_cmd->add_option("--embedding", basis_args.embedding_dir, "embedding stack directory");
  basis_cmd->add_option("--A", basis_args.embed_dim, "expected embedding dimension");
  basis_cmd->add_flag("--renormalize-embedding", basis_args.renormalize_embedding,
                      "renormalize embedding vectors to unit length on load");
  basis_cmd->add_flag("--object-rotations", basis_args.object_rotations,
                      "include embedding-weighted rotation fields");
  basis_cmd->add_option("--out", basis_args.out_dir, "output directory")->required();

  ProjectArgs project_args;
  auto* project_cmd = app.add_subcommand("project", "project a flow onto a basis");
  project_cmd->add_option("--basis", project_args.basis_dir, "basis stack directory")->required();
  project_cmd->add_option("--flow", project_args.flow_path, "observed flow (.flo)")->required();
  project_cmd->add_option("--eps", project_args.epsilon, "singular value threshold");
  project_cmd->add_flag("--relative-eps", project_args.relative_threshold,
                        "threshold relative to the largest singular value");
  project_cmd->add_option("--camera-basis", project_args.camera_basis_dir,
                          "camera-only basis for the two-solve loss");
  project_cmd->add_option("--camera-weight", project_args.camera_weight,
                          "weight of the camera-only loss");
  project_cmd->add_option("--full-weight", project_args.full_weight,
                          "weight of the full-basis loss");
  project_cmd->add_option("--out", project_args.out_dir, "output directory");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene and its flow");
  synth_cmd->add_option("--scene", synth_args.scene, "cube, plane or two-objects");
  synth_cmd->add_option("--shape", synth_args.shape_text, "image size HxW");
  synth_cmd->add_option("--intrinsics", synth_args.intrinsics_text, "fx,fy,cx,cy");
  synth_cmd->add_option("--motion", synth_args.motion_text, "camera velocity tx,ty,tz,wx,wy,wz");
  synth_cmd->add_option("--object-motion", synth_args.object_motion_texts,
                        "object velocity tx,ty,tz,wx,wy,wz (repeatable)");
  synth_cmd->add_option("--step", synth_args.step, "motion scale for the exact flow");
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "recover motion from a projection");
  analyze_cmd->add_option("--basis", analyze_args.basis_dir, "basis stack directory")->required();
  analyze_cmd->add_option("--flow", analyze_args.flow_path, "observed flow (.flo)")->required();
  analyze_cmd->add_option("--eps", analyze_args.epsilon, "singular value threshold");
  analyze_cmd->add_option("--out", analyze_args.out_path, "machine-readable report (JSON)");

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  gradcheck_cmd->add_option("--trials", gradcheck_args.trials, "number of random problems");
  gradcheck_cmd->add_option("--max-size", gradcheck_args.max_size, "largest image side");
  gradcheck_cmd->add_option("--tolerance", gradcheck_args.tolerance, "max relative error");
  gradcheck_cmd->add_option("--eps", gradcheck_args.epsilon, "singular value threshold");

  MetricsArgs metrics_args;
  auto* metrics_cmd = app.add_subcommand("metrics", "depth evaluation metrics");
  metrics_cmd->add_option("--pred", metrics_args.pred_path, "predicted depth (PFM)")->required();
  metrics_cmd->add_option("--gt", metrics_args.gt_path, "ground-truth depth (PFM)")->required();
  metrics_cmd->add_option("--mask", metrics_args.mask_path, "validity mask (PGM)");
  metrics_cmd->add_option("--alignment", metrics_args.alignment, "none or median");
  metrics_cmd->add_flag("--pred-is-disparity", metrics_args.pred_is_disparity,
                        "invert the prediction before evaluating");
  metrics_cmd->add_flag("--gt-is-disparity", metrics_args.gt_is_disparity,
                        "invert the ground truth before evaluating");
  metrics_cmd->add_option("--out", metrics_args.out_path, "machine-readable report (JSON)");

  SegmentArgs segment_args;
  auto* segment_cmd = app.add_subcommand("segment", "nearest-seed segmentation of an embedding");
  segment_cmd->add_option("--embedding", segment_args.embedding_dir, "embedding stack directory")
      ->required();
  segment_cmd->add_option("--seeds", segment_args.seeds_path, "seed list ('label u v' per line)")
      ->required();
  segment_cmd->add_option("--lambda-spatial", segment_args.lambda_spatial,
                          "weight on squared pixel distance");
  segment_cmd->add_option("--lambda-embed", segment_args.lambda_embed,
                          "weight on squared embedding distance");
  segment_cmd->add_option("--out", segment_args.out_path, "label map (PGM)")->required();
  segment_cmd->add_option("--png", segment_args.png_path, "colorized label map (PNG)");

  ColorizeArgs colorize_args;
  auto* colorize_cmd = app.add_subcommand("colorize", "render a flow field to PNG");
  colorize_cmd->add_option("--flow", colorize_args.flow_path, "flow field (.flo)")->required();
  colorize_cmd->add_option("--max-magnitude", colorize_args.max_magnitude,
                           "saturation scale (default: field maximum)");
  colorize_cmd->add_option("--out", colorize_args.out_path, "output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (basis_cmd->parsed()) return run_basis(basis_args);
    if (project_cmd->parsed()) return run_project(project_args);
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (analyze_cmd->parsed()) return run_analyze(analyze_args);
    if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_args);
    if (metrics_cmd->parsed()) return run_metrics(metrics_args);
    if (segment_cmd->parsed()) return run_segment(segment_args);
    if (colorize_cmd->parsed()) return run_colorize(colorize_args);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
