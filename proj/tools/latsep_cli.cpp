// Single-binary command-line front door: config-driven dataset synthesis,
// training, evaluation, and figure-style outputs. Exit codes: 0 success,
// 2 configuration/input error, 3 numerical abort.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "latsep/common.hpp"
#include "latsep/dependence.hpp"
#include "latsep/encoder.hpp"
#include "latsep/gan.hpp"
#include "latsep/metrics.hpp"
#include "latsep/plots.hpp"
#include "latsep/synthdata.hpp"
#include "latsep/toyopt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_root() {
  if (const char* env = std::getenv("LATSEP_OUT_ROOT")) return env;
  return "runs";
}

// resolved run settings hashed into every artifact
std::string config_hash(const json& cfg) { return latsep::hex64(latsep::fnv1a64(cfg.dump())); }

json run_meta(const json& cfg, uint64_t seed) {
  return {{"config", cfg},
          {"config_hash", config_hash(cfg)},
          {"code_fingerprint", latsep::code_fingerprint()},
          {"seed", seed}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw latsep::data_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw latsep::config_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw latsep::config_error(path.string() + ": " + e.what());
  }
}

// Declarative config file: keys mirror the long option names (without
// dashes converted to underscores); unknown keys are rejected; explicit
// command-line options win over file values.
void apply_config_file(const std::string& path, CLI::App* cmd) {
  if (path.empty()) return;
  auto cfg = read_json(path);
  if (!cfg.is_object()) throw latsep::config_error(path + ": config must be an object");
  for (const auto& [key, value] : cfg.items()) {
    auto* opt = cmd->get_option_no_throw("--" + key);
    if (!opt) throw latsep::config_error(path + ": unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // command line wins
    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

fs::path prepare_out_dir(const std::string& out, const std::string& fallback, bool force) {
  fs::path dir = out.empty() ? output_root() / fallback : fs::path(out);
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw latsep::config_error("output directory " + dir.string() +
                               " is not empty (use --force to overwrite)");
  fs::create_directories(dir);
  return dir;
}

struct Dataset {
  latsep::synthdata::LabeledImageBatch train, val, test;
};

Dataset load_dataset(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "train" / "manifest.jsonl"))
    throw latsep::config_error("no dataset at " + dir + " (expected split manifests)");
  return {latsep::synthdata::load_split(fs::path(dir) / "train"),
          latsep::synthdata::load_split(fs::path(dir) / "val"),
          latsep::synthdata::load_split(fs::path(dir) / "test")};
}

latsep::encoder::EncoderDataset as_encoder_data(const latsep::synthdata::LabeledImageBatch& b) {
  return {b.images, {b.attribute_labels, b.camera_labels}};
}

// --- toy ---------------------------------------------------------------------

void add_cmd_toy(CLI::App& app) {
  auto* cmd = app.add_subcommand("toy", "optimize a synthetic point-cloud pair");
  auto pattern = std::make_shared<std::string>("nonlinear_sine");
  auto measure = std::make_shared<std::string>("dcor");
  auto n = std::make_shared<int64_t>(1000);
  auto noise = std::make_shared<double>(0.05);
  auto steps = std::make_shared<int64_t>(500);
  auto lr = std::make_shared<double>(0.05);
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto config = std::make_shared<std::string>();
  cmd->add_option("--pattern", *pattern, "independent|linear|nonlinear_sine|nonlinear_circle|nonlinear_quadratic");
  cmd->add_option("--measure", *measure, "dcor|gmi|cgmi");
  cmd->add_option("--n", *n, "points per cloud");
  cmd->add_option("--noise", *noise, "noise scale");
  cmd->add_option("--steps", *steps, "optimization steps");
  cmd->add_option("--lr", *lr, "learning rate");
  cmd->add_option("--seed", *seed, "random seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    auto pat = latsep::toyopt::pattern_from_name(*pattern);
    latsep::toyopt::ToyOptConfig tc;
    tc.measure = latsep::toyopt::measure_from_name(*measure);
    tc.steps = *steps;
    tc.learning_rate = *lr;
    tc.seed = *seed;
    auto dir = prepare_out_dir(*out, "toy-" + *pattern + "-" + *measure, *force);
    auto cloud = latsep::toyopt::generate_pattern(pat, *n, *noise, *seed);
    auto result = latsep::toyopt::optimize_points(cloud, tc);

    json cfg{{"pattern", *pattern}, {"measure", *measure}, {"n", *n},
             {"noise", *noise},     {"steps", *steps},     {"lr", *lr}};
    json trajectory = json::array();
    for (const auto& p : result.trajectory)
      trajectory.push_back(
          {{"step", p.step}, {"measure", p.measure_value}, {"dcor", p.dcor_value}});
    json report = run_meta(cfg, *seed);
    report["final_dcor"] = latsep::toyopt::final_dcor(result);
    report["final_measure"] = result.trajectory.back().measure_value;
    report["trajectory"] = trajectory;
    write_json(dir / "trajectory.json", report);

    std::vector<std::string> names = {"w1_0", "w1_1", "w2_0", "w2_1"};
    latsep::plots::scatter_matrix_png(
        torch::cat({result.initial.w1, result.initial.w2}, 1), names,
        (dir / "pairs_before.png").string(), "before optimization");
    latsep::plots::scatter_matrix_png(
        torch::cat({result.final_pair.w1, result.final_pair.w2}, 1), names,
        (dir / "pairs_after.png").string(), "after optimization");
    std::cout << dir.string() << "\n";
  });
}

// --- make-data ---------------------------------------------------------------

void add_cmd_make_data(CLI::App& app) {
  auto* cmd = app.add_subcommand("make-data", "synthesize a confounded labeled dataset");
  auto n = std::make_shared<int64_t>(1200);
  auto correlation = std::make_shared<double>(0.0);
  auto resolution = std::make_shared<int>(64);
  auto cameras = std::make_shared<int>(5);
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto config = std::make_shared<std::string>();
  cmd->add_option("--n", *n, "total images");
  cmd->add_option("--correlation", *correlation, "attribute-camera confound strength in [0,1]");
  cmd->add_option("--resolution", *resolution, "image resolution (32|64|128|256)");
  cmd->add_option("--cameras", *cameras, "camera class count");
  cmd->add_option("--seed", *seed, "random seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    latsep::synthdata::ConfoundSpec confound;
    confound.correlation_strength = *correlation;
    confound.camera_cardinality = *cameras;
    auto dir = prepare_out_dir(*out, "data-c" + std::to_string(*correlation), *force);
    auto data = latsep::synthdata::sample_dataset(*n, confound, *resolution, *seed);
    auto splits = latsep::synthdata::split_by_identity(data.factors, *seed);
    latsep::synthdata::save_dataset(dir, data, splits);
    json cfg{{"n", *n},
             {"correlation", *correlation},
             {"resolution", *resolution},
             {"cameras", *cameras}};
    write_json(dir / "dataset.json", run_meta(cfg, *seed));
    std::cout << dir.string() << "\n";
  });
}

// --- train-encoder -------------------------------------------------------------

void add_cmd_train_encoder(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-encoder", "train the subspace encoder");
  auto data = std::make_shared<std::string>();
  auto lambda_dc = std::make_shared<double>(0.5);
  auto epochs = std::make_shared<int64_t>(30);
  auto batch = std::make_shared<int64_t>(256);
  auto lr = std::make_shared<double>(1e-3);
  auto dims = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{8, 8});
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto resume = std::make_shared<std::string>();
  auto config = std::make_shared<std::string>();
  cmd->add_option("--data", *data, "dataset directory")->required();
  cmd->add_option("--lambda-dc", *lambda_dc, "disentanglement loss weight");
  cmd->add_option("--epochs", *epochs, "training epochs");
  cmd->add_option("--batch", *batch, "batch size");
  cmd->add_option("--lr", *lr, "learning rate");
  cmd->add_option("--dims", *dims, "attribute and camera subspace widths");
  cmd->add_option("--seed", *seed, "random seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--resume", *resume, "checkpoint to continue from");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    if (dims->size() != 2) throw latsep::config_error("--dims expects two widths");
    auto ds = load_dataset(*data);
    latsep::encoder::SubspaceLayout layout{{"attribute", "camera"}, *dims};
    std::vector<int64_t> classes = {ds.train.attribute_labels.max().item<int64_t>() + 1,
                                    ds.train.camera_labels.max().item<int64_t>() + 1};
    latsep::encoder::EncoderTrainConfig tc;
    tc.lambda_dc = *lambda_dc;
    tc.epochs = *epochs;
    tc.batch_size = *batch;
    tc.learning_rate = *lr;
    tc.seed = *seed;
    auto dir = prepare_out_dir(*out, "encoder", *force);
    latsep::encoder::ModelBundle warm;
    const latsep::encoder::ModelBundle* warm_ptr = nullptr;
    if (!resume->empty()) {
      warm = latsep::encoder::load_bundle(*resume);
      warm_ptr = &warm;
    }
    auto bundle = latsep::encoder::train_encoder(as_encoder_data(ds.train),
                                                 as_encoder_data(ds.val), layout, classes,
                                                 tc, {}, warm_ptr);
    latsep::encoder::save_bundle((dir / "encoder.pt").string(), bundle);
    json cfg{{"data", *data},     {"lambda_dc", *lambda_dc}, {"epochs", *epochs},
             {"batch", *batch},   {"dims", *dims},           {"resume", *resume}};
    json report = run_meta(cfg, *seed);
    report["log"] = latsep::encoder::log_to_json(bundle.log);
    report["best_epoch"] = bundle.best_epoch;
    write_json(dir / "train_log.json", report);
    std::cout << dir.string() << "\n";
  });
}

// --- train-gan -------------------------------------------------------------------

void add_cmd_train_gan(CLI::App& app) {
  auto* cmd = app.add_subcommand("train-gan", "train the style-based generative model");
  auto data = std::make_shared<std::string>();
  auto lambda_dc = std::make_shared<double>(0.2);
  auto epochs = std::make_shared<int64_t>(10);
  auto batch = std::make_shared<int64_t>(56);
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto resume = std::make_shared<std::string>();
  auto config = std::make_shared<std::string>();
  cmd->add_option("--data", *data, "dataset directory")->required();
  cmd->add_option("--lambda-dc", *lambda_dc, "disentanglement loss weight");
  cmd->add_option("--epochs", *epochs, "training epochs");
  cmd->add_option("--batch", *batch, "batch size");
  cmd->add_option("--seed", *seed, "random seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--resume", *resume, "checkpoint to continue from");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    auto ds = load_dataset(*data);
    latsep::gan::GanTrainConfig gc;
    gc.resolution = ds.train.images.size(2);
    gc.class_counts = {ds.train.attribute_labels.max().item<int64_t>() + 1,
                       ds.train.camera_labels.max().item<int64_t>() + 1, 0};
    gc.lambda_dc = *lambda_dc;
    gc.epochs = *epochs;
    gc.batch_size = *batch;
    gc.seed = *seed;
    auto dir = prepare_out_dir(*out, "gan", *force);
    latsep::gan::GanBundle warm;
    const latsep::gan::GanBundle* warm_ptr = nullptr;
    if (!resume->empty()) {
      warm = latsep::gan::load_gan(*resume);
      warm_ptr = &warm;
    }
    std::vector<torch::Tensor> labels = {ds.train.attribute_labels, ds.train.camera_labels,
                                         torch::Tensor()};
    auto model = latsep::gan::train_gan(ds.train.images, labels, gc, warm_ptr);
    latsep::gan::save_gan(model, (dir / "gan.pt").string());
    json cfg{{"data", *data},   {"lambda_dc", *lambda_dc}, {"epochs", *epochs},
             {"batch", *batch}, {"resume", *resume}};
    json report = run_meta(cfg, *seed);
    report["log"] = latsep::gan::step_log_to_json(model.log);
    write_json(dir / "train_log.json", report);
    std::cout << dir.string() << "\n";
  });
}

// --- eval ------------------------------------------------------------------------

void add_cmd_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "disentanglement report for a checkpoint");
  auto checkpoint = std::make_shared<std::string>();
  auto kind = std::make_shared<std::string>("encoder");
  auto data = std::make_shared<std::string>();
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto config = std::make_shared<std::string>();
  cmd->add_option("--checkpoint", *checkpoint, "model checkpoint")->required();
  cmd->add_option("--kind", *kind, "encoder|gan");
  cmd->add_option("--data", *data, "dataset directory")->required();
  cmd->add_option("--seed", *seed, "subsampling seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    auto ds = load_dataset(*data);
    latsep::encoder::SubspaceLayout layout;
    torch::Tensor train_w, test_w;
    if (*kind == "encoder") {
      auto bundle = latsep::encoder::load_bundle(*checkpoint);
      layout = bundle.layout;
      train_w = latsep::encoder::encode(bundle, ds.train.images);
      test_w = latsep::encoder::encode(bundle, ds.test.images);
    } else if (*kind == "gan") {
      auto bundle = latsep::gan::load_gan(*checkpoint);
      layout = bundle.config.layout();
      train_w = latsep::gan::encode_image(bundle.disc,
                                          latsep::gan::to_network_range(ds.train.images));
      test_w = latsep::gan::encode_image(bundle.disc,
                                         latsep::gan::to_network_range(ds.test.images));
    } else {
      throw latsep::config_error("eval: --kind must be encoder or gan");
    }
    auto dir = prepare_out_dir(*out, "eval", *force);
    latsep::metrics::DisentanglementReport report;
    report.subspace_names = layout.names;
    report.factor_names = {"attribute", "camera"};
    report.seed = *seed;
    report.confusion = latsep::metrics::knn_confusion(
        layout.slices(train_w), {ds.train.attribute_labels, ds.train.camera_labels},
        layout.slices(test_w), {ds.test.attribute_labels, ds.test.camera_labels});
    report.pairwise_dcor = latsep::metrics::pairwise_dcor_report(layout.slices(test_w), *seed);
    json cfg{{"checkpoint", *checkpoint}, {"kind", *kind}, {"data", *data}};
    auto j = latsep::metrics::report_to_json(report);
    j["run"] = run_meta(cfg, *seed);
    write_json(dir / "report.json", j);
    latsep::plots::heatmap_png(report.confusion, layout.names, report.factor_names,
                               (dir / "confusion.png").string(),
                               "kNN accuracy above chance (pts)");
    latsep::plots::heatmap_png(report.pairwise_dcor, layout.names, layout.names,
                               (dir / "pairwise_dcor.png").string(), "pairwise dCor");
    std::cout << dir.string() << "\n";
  });
}

// --- swap-grid ----------------------------------------------------------------------

void add_cmd_swap_grid(CLI::App& app) {
  auto* cmd = app.add_subcommand("swap-grid", "matrix of subspace-swapped reconstructions");
  auto checkpoint = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto ids = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{0, 1, 2});
  auto subspace = std::make_shared<std::string>("identity");
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto config = std::make_shared<std::string>();
  cmd->add_option("--checkpoint", *checkpoint, "generative model checkpoint")->required();
  cmd->add_option("--data", *data, "dataset directory")->required();
  cmd->add_option("--ids", *ids, "test-split image indices");
  cmd->add_option("--subspace", *subspace, "subspace to exchange");
  cmd->add_option("--seed", *seed, "noise seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    auto bundle = latsep::gan::load_gan(*checkpoint);
    auto ds = load_dataset(*data);
    for (int64_t i : *ids)
      if (i < 0 || i >= ds.test.images.size(0))
        throw latsep::config_error("swap-grid: image index out of range");
    auto index = torch::tensor(*ids, torch::kInt64);
    auto images = ds.test.images.index_select(0, index);
    auto w = latsep::gan::encode_image(bundle.disc, latsep::gan::to_network_range(images));
    auto layout = bundle.config.layout();
    const int64_t k = w.size(0);
    std::vector<torch::Tensor> cells;
    json manifest = json::array();
    torch::NoGradGuard no_grad;
    bundle.gen->eval();
    for (int64_t row = 0; row < k; ++row)
      for (int64_t col = 0; col < k; ++col) {
        auto swapped = latsep::gan::swap_subspace(w.slice(0, row, row + 1),
                                                  w.slice(0, col, col + 1), layout, *subspace);
        auto rng = latsep::make_generator(*seed);
        cells.push_back(latsep::gan::to_unit_range(
            latsep::gan::generate(bundle.gen, swapped, rng))[0]);
        manifest.push_back({{"row", row},
                            {"col", col},
                            {"target", (*ids)[row]},
                            {"donor", (*ids)[col]},
                            {"subspace", *subspace}});
      }
    auto dir = prepare_out_dir(*out, "swap-grid", *force);
    latsep::plots::save_image_png(latsep::plots::image_grid(torch::stack(cells), k),
                                  (dir / "grid.png").string());
    json cfg{{"checkpoint", *checkpoint}, {"data", *data},
             {"ids", *ids},               {"subspace", *subspace}};
    json meta = run_meta(cfg, *seed);
    meta["cells"] = manifest;
    write_json(dir / "manifest.json", meta);
    std::cout << dir.string() << "\n";
  });
}

// --- swap-eval -----------------------------------------------------------------------

void add_cmd_swap_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("swap-eval", "three-scenario swap-classifier evaluation");
  auto checkpoint = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto factor = std::make_shared<std::string>("attribute");
  auto epochs = std::make_shared<int64_t>(12);
  auto seed = std::make_shared<uint64_t>(0);
  auto out = std::make_shared<std::string>();
  auto force = std::make_shared<bool>(false);
  auto config = std::make_shared<std::string>();
  cmd->add_option("--checkpoint", *checkpoint, "generative model checkpoint")->required();
  cmd->add_option("--data", *data, "dataset directory")->required();
  cmd->add_option("--factor", *factor, "attribute|camera");
  cmd->add_option("--epochs", *epochs, "swap-classifier epochs");
  cmd->add_option("--seed", *seed, "random seed");
  cmd->add_option("--out", *out, "output directory");
  cmd->add_flag("--force", *force, "allow non-empty output directory");
  cmd->add_option("--config", *config, "JSON config file");
  cmd->callback([=, cmdp = cmd] {
    apply_config_file(*config, cmdp);
    auto bundle = latsep::gan::load_gan(*checkpoint);
    auto ds = load_dataset(*data);
    if (*factor != "attribute" && *factor != "camera")
      throw latsep::config_error("swap-eval: --factor must be attribute or camera");
    auto labels_of = [&](const latsep::synthdata::LabeledImageBatch& b) {
      return *factor == "attribute" ? b.attribute_labels : b.camera_labels;
    };
    latsep::metrics::ReconFn recon = [&](const torch::Tensor& x) {
      auto w = latsep::gan::encode_image(bundle.disc, latsep::gan::to_network_range(x));
      torch::NoGradGuard no_grad;
      auto rng = latsep::make_generator(*seed);
      return latsep::gan::to_unit_range(latsep::gan::generate(bundle.gen, w, rng));
    };
    latsep::metrics::SwapFn swap = [&](const torch::Tensor& x, const torch::Tensor& y) {
      auto res = latsep::gan::rotate_swap_protocol(bundle.gen, bundle.disc, x, y, *factor,
                                                   *seed);
      return std::make_pair(res.images, res.labels);
    };
    latsep::metrics::SwapClassifierConfig sc;
    sc.epochs = *epochs;
    sc.seed = *seed;
    auto report = latsep::metrics::swap_classifier_eval(
        recon, swap, ds.train.images, labels_of(ds.train), ds.test.images,
        labels_of(ds.test), sc);
    auto dir = prepare_out_dir(*out, "swap-eval", *force);
    json cfg{{"checkpoint", *checkpoint}, {"data", *data},
             {"factor", *factor},         {"epochs", *epochs}};
    json j = run_meta(cfg, *seed);
    j["standard"] = report.standard;
    j["swapped_new_labels"] = report.swapped_new_labels;
    j["swapped_original_labels"] = report.swapped_original_labels;
    j["chance"] = latsep::metrics::chance_level(labels_of(ds.test));
    write_json(dir / "swap_eval.json", j);
    std::cout << dir.string() << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent subspace toolkit"};
  app.require_subcommand(1);
  add_cmd_toy(app);
  add_cmd_make_data(app);
  add_cmd_train_encoder(app);
  add_cmd_train_gan(app);
  add_cmd_eval(app);
  add_cmd_swap_grid(app);
  add_cmd_swap_eval(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const c10::Error& e) {  // malformed checkpoints, tensor plumbing
    std::cerr << "error: " << e.what_without_backtrace() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
