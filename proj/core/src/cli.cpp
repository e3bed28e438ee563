#include "aff/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aff/gradcheck_suite.hpp"
#include "aff/image_io.hpp"
#include "aff/model.hpp"
#include "aff/token_csv.hpp"
#include "aff/train.hpp"

namespace aff {

namespace {

namespace fs = std::filesystem;

std::vector<Vec2> grid_positions(const std::string& spec) {
  const auto x = spec.find('x');
  check(x != std::string::npos, "grid must look like WxH, got '" + spec + "'");
  const int w = std::stoi(spec.substr(0, x));
  const int h = std::stoi(spec.substr(x + 1));
  check(w >= 1 && h >= 1, "grid dimensions must be positive");
  return lattice_positions(h, w);
}

ModelConfig load_config(const std::string& path) {
  return path.empty() ? ModelConfig::aff_nano() : ModelConfig::from_json_file(path);
}

Tensor<float> image_tensor(const Image& img, int in_channels) {
  const std::vector<float> unit = to_unit_floats(img);
  const std::int64_t n = std::int64_t(img.height) * img.width;
  Tensor<float> t(n, in_channels);
  if (img.channels == in_channels) {
    std::copy(unit.begin(), unit.end(), t.data.begin());
  } else if (img.channels == 3 && in_channels == 1) {
    for (std::int64_t i = 0; i < n; ++i)
      t(i, 0) = (unit[std::size_t(3 * i)] + unit[std::size_t(3 * i + 1)] + unit[std::size_t(3 * i + 2)]) / 3.0f;
  } else {
    check(false, "image has " + std::to_string(img.channels) + " channels but the model expects " +
                     std::to_string(in_channels));
  }
  return t;
}

std::vector<TokenRecord> dump_records(const StageDump& d) {
  std::vector<TokenRecord> recs(d.positions.size());
  for (std::size_t i = 0; i < d.positions.size(); ++i) {
    recs[i].stage = d.stage;
    recs[i].x = d.positions[i].x;
    recs[i].y = d.positions[i].y;
    recs[i].g = d.g[i];
    recs[i].s = d.s[i];
    recs[i].reserved = d.reserved[i];
    recs[i].selected = d.selected[i];
  }
  return recs;
}

std::vector<Vec2> selected_positions(const std::vector<TokenRecord>& recs) {
  std::vector<Vec2> out;
  for (const TokenRecord& r : recs)
    if (r.selected) out.push_back({r.x, r.y});
  return out;
}

int cmd_cluster(const std::string& input, const std::string& grid, std::int64_t cluster_size,
                const std::string& curve_name, bool no_anchors, const std::string& out,
                const std::string& ordering_out) {
  check(input.empty() != grid.empty(), "pass exactly one of --input or --grid");
  const std::vector<Vec2> positions = input.empty() ? grid_positions(grid) : read_positions_csv(input);
  const CurveKind curve = curve_from_string(curve_name);

  const ClusterAssignment assignment = no_anchors
                                           ? no_anchor_cluster(positions, cluster_size, curve)
                                           : balanced_cluster(positions, cluster_size, curve);
  write_cluster_csv(out, positions, assignment);

  if (!ordering_out.empty()) {
    const AnchorGrid ag = build_anchor_grid(bounding_box(positions), assignment.cluster_count);
    std::ofstream f(ordering_out);
    check(f.good(), "cannot open " + ordering_out);
    f << order_by_kind(ag, curve).to_json() << "\n";
  }

  std::printf("clusters %lld\n", static_cast<long long>(assignment.cluster_count));
  std::printf("silhouette %s\n", format_real(silhouette(positions, assignment)).c_str());
  return 0;
}

int cmd_downsample_demo(const std::string& image_path, const std::string& config_path,
                        const std::string& checkpoint, const std::string& out_dir) {
  const Image img = read_image(image_path);
  const ModelConfig cfg = load_config(config_path);
  fs::create_directories(out_dir);

  ParamStore<float> ps(0);
  register_model(ps, cfg);
  if (!checkpoint.empty()) ps.load(checkpoint);

  Graph<float> g;
  GraphBinding<float> bind(g, ps);
  const auto px = g.leaf(image_tensor(img, cfg.in_channels));
  const ForwardResult<float> fr = classify(g, bind, cfg, img.height, img.width, px);

  for (const StageDump& d : fr.dumps) {
    const std::string stem = (fs::path(out_dir) / ("stage" + std::to_string(d.stage))).string();
    const std::vector<TokenRecord> recs = dump_records(d);
    write_token_csv(stem + ".csv", recs);
    write_image(render_overlay(img, selected_positions(recs)), stem + ".ppm");
  }
  std::printf("stages %zu tokens_final %zu\n", fr.dumps.size(), fr.final_positions.size());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  const std::vector<SuiteResult> results = run_gradcheck_suite(seed);
  double worst = 0.0;
  bool scores_flow = true;
  for (const SuiteResult& r : results) {
    worst = std::max(worst, r.max_rel_err);
    if (r.score_grad_norm >= 0.0) {
      std::printf("%-28s rel_err %.3e  score_grad_norm %.3e\n", r.name.c_str(), r.max_rel_err,
                  r.score_grad_norm);
      if (!(r.score_grad_norm > 0.0)) scores_flow = false;
    } else {
      std::printf("%-28s rel_err %.3e\n", r.name.c_str(), r.max_rel_err);
    }
  }
  const bool ok = worst < 1e-4 && scores_flow;
  std::printf("max rel_err %.3e  %s\n", worst, ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

int cmd_train_toy(const std::string& config_path, std::uint64_t seed, const TrainOptions& opts,
                  int train_size, int test_size, int image_size, const std::string& out_dir) {
  const ModelConfig cfg = load_config(config_path);
  fs::create_directories(out_dir);

  const std::vector<ToyImage> train = make_toy_dataset(seed, train_size, image_size);
  const std::vector<ToyImage> test = make_toy_dataset(seed + 1, test_size, image_size);

  ParamStore<float> ps(seed);
  register_model(ps, cfg);
  const TrainResult result = train_toy(cfg, ps, train, test, opts, [](const EpochLog& e) {
    std::printf("epoch %d loss %s acc %s focus %s\n", e.epoch, format_real(e.loss).c_str(),
                format_real(e.accuracy).c_str(), format_real(e.focus_ratio).c_str());
    std::fflush(stdout);
  });

  std::vector<std::array<double, 4>> rows;
  for (const EpochLog& e : result.log)
    rows.push_back({double(e.epoch), e.loss, e.accuracy, e.focus_ratio});
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), rows);
  ps.save((fs::path(out_dir) / "checkpoint.bin").string());
  return 0;
}

int cmd_render(const std::string& image_path, const std::string& tokens_path,
               const std::string& out_path) {
  const Image img = read_image(image_path);
  const std::vector<TokenRecord> recs = read_token_csv(tokens_path);
  write_image(render_overlay(img, selected_positions(recs)), out_path);
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Irregular-token pipeline: balanced clustering, local attention, adaptive downsampling"};
  app.require_subcommand(1);

  // cluster
  std::string cl_input, cl_grid, cl_curve = "scanline", cl_out = "clusters.csv", cl_ordering;
  std::int64_t cl_size = 8;
  bool cl_no_anchors = false;
  CLI::App* cluster = app.add_subcommand("cluster", "Cluster a 2D token set and report silhouette");
  cluster->add_option("--input", cl_input, "Positions CSV with x,y columns");
  cluster->add_option("--grid", cl_grid, "Synthetic WxH unit lattice instead of --input");
  cluster->add_option("--cluster-size", cl_size, "Target tokens per cluster")->check(CLI::PositiveNumber);
  cluster->add_option("--curve", cl_curve, "Anchor ordering curve")
      ->check(CLI::IsMember({"scanline", "peano", "hilbert"}));
  cluster->add_flag("--no-anchors", cl_no_anchors, "Order unit cells directly, no anchor grid");
  cluster->add_option("--out", cl_out, "Assignment CSV path");
  cluster->add_option("--ordering-out", cl_ordering, "Write the anchor visit order as JSON");

  // downsample-demo
  std::string dd_image, dd_config, dd_checkpoint, dd_out;
  CLI::App* demo = app.add_subcommand("downsample-demo", "Per-stage token dumps and overlays for one image");
  demo->add_option("--image", dd_image, "PGM/PPM input image")->required();
  demo->add_option("--config", dd_config, "Model config JSON (default: built-in nano)");
  demo->add_option("--checkpoint", dd_checkpoint, "Trained parameter file");
  demo->add_option("--out", dd_out, "Output directory")->required();

  // gradcheck
  std::uint64_t gc_seed = 0;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("--seed", gc_seed, "RNG seed");

  // train-toy
  std::string tt_config, tt_out;
  std::uint64_t tt_seed = 0;
  TrainOptions tt_opts;
  int tt_train = 2000, tt_test = 500, tt_image = 48;
  CLI::App* train = app.add_subcommand("train-toy", "Train on the synthetic textured-patch dataset");
  train->add_option("--config", tt_config, "Model config JSON (default: built-in nano)");
  train->add_option("--seed", tt_seed, "RNG seed");
  train->add_option("--epochs", tt_opts.epochs, "Training epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", tt_opts.lr, "AdamW learning rate");
  train->add_option("--weight-decay", tt_opts.weight_decay, "AdamW weight decay");
  train->add_option("--batch-size", tt_opts.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--threads", tt_opts.threads, "Worker threads (0 = all cores)");
  train->add_option("--train-size", tt_train, "Training images")->check(CLI::PositiveNumber);
  train->add_option("--test-size", tt_test, "Test images")->check(CLI::PositiveNumber);
  train->add_option("--image-size", tt_image, "Square image side, multiple of 4");
  train->add_option("--stop-accuracy", tt_opts.stop_accuracy, "Stop early at this test accuracy");
  train->add_option("--stop-focus", tt_opts.stop_focus, "Focus ratio required for early stop");
  train->add_option("--out", tt_out, "Output directory")->required();

  // render
  std::string rd_image, rd_tokens, rd_out;
  CLI::App* render = app.add_subcommand("render", "Overlay selected tokens on an image");
  render->add_option("--image", rd_image, "PGM/PPM input image")->required();
  render->add_option("--tokens", rd_tokens, "Token dump CSV")->required();
  render->add_option("--out", rd_out, "Output PPM path")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cluster->parsed())
      return cmd_cluster(cl_input, cl_grid, cl_size, cl_curve, cl_no_anchors, cl_out, cl_ordering);
    if (demo->parsed()) return cmd_downsample_demo(dd_image, dd_config, dd_checkpoint, dd_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed);
    if (train->parsed()) {
      tt_opts.seed = tt_seed;
      return cmd_train_toy(tt_config, tt_seed, tt_opts, tt_train, tt_test, tt_image, tt_out);
    }
    if (render->parsed()) return cmd_render(rd_image, rd_tokens, rd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace aff
