// gradforge command line: train | gradcheck | eval | predict | boundary.
// Exit codes: 0 ok, 2 config/usage error, 3 numeric divergence, 4 gradient
// check failure. Every error path prints a single "error:<code>:" line.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradforge/gradforge.hpp"

namespace gf = gradforge;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitGradcheck = 4;

struct CliError {
    int code;
    std::string message;
};

struct TrainArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> niter;
    std::optional<double> eta;
    std::string out_dir;
    std::string data;
};

struct GradcheckArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool corrupt = false;
};

struct EvalArgs {
    std::string model_path;
    std::string data;
    std::size_t n_features = 0;
    std::size_t num_classes = 0;
    std::string out_dir;
};

struct PredictArgs {
    std::string model_path;
    std::vector<std::string> inputs;
};

struct BoundaryArgs {
    std::string model_path;
    std::size_t resolution = 201;
    std::string out_path;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CliError{kExitConfig, "cannot open '" + path.string() + "' for writing"};
    return f;
}

gf::LabeledDataset dataset_from_selector(const std::string& selector, std::size_t n_features,
                                         std::size_t num_classes) {
    if (selector == "toy") return gf::toy_dataset();
    if (selector == "toy_extended") return gf::toy_dataset_extended();
    if (n_features == 0 || num_classes == 0)
        throw gf::ConfigError("data: CSV data needs --n-features and --classes");
    return gf::load_csv(selector, n_features, num_classes);
}

int run_train(const TrainArgs& args) {
    gf::RunConfig rc = gf::parse_config_file(args.config_path);
    if (args.seed) rc.seed = *args.seed;
    if (args.niter) {
        rc.niter = *args.niter;
        rc.epochs.reset();
    }
    if (args.eta) {
        rc.eta = *args.eta;
        rc.eta_schedule.clear();
    }
    if (!args.out_dir.empty()) rc.out_dir = args.out_dir;
    if (!args.data.empty()) rc.data = args.data;

    gf::NetworkSpec net = gf::build_network(rc.network_desc);
    const gf::LossKind loss = gf::make_loss(rc);
    const gf::LabeledDataset all = gf::load_configured_data(rc);
    if (gf::output_dim(net) != all.num_classes)
        throw gf::ConfigError("network: output dimension " +
                              std::to_string(gf::output_dim(net)) + " but data has " +
                              std::to_string(all.num_classes) + " classes");
    if (net.input_dim() != all.input_dim())
        throw gf::ConfigError("network: input dimension " + std::to_string(net.input_dim()) +
                              " but data has dimension " + std::to_string(all.input_dim()));
    const gf::Split split = gf::split(all, rc.val_fraction, rc.seed);
    const gf::TrainConfig tcfg = gf::make_train_config(rc, net.layers.size());

    net = gf::init_params(std::move(net), rc.seed);

    const auto t0 = std::chrono::steady_clock::now();
    const gf::TrainReport report =
        gf::train(net, split.train, split.validation.empty() ? nullptr : &split.validation,
                  loss, tcfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(rc.out_dir);
    {
        auto f = open_out(fs::path(rc.out_dir) / "model.txt");
        gf::save_model(report.final_net, f);
    }
    {
        auto f = open_out(fs::path(rc.out_dir) / "cost_history.csv");
        for (const gf::CostPoint& p : report.cost_history) {
            f << p.step << ',' << gf::format_real(p.train_cost);
            if (p.val_cost) f << ',' << gf::format_real(*p.val_cost);
            f << '\n';
        }
    }
    const double final_cost = report.cost_history.back().train_cost;
    const double n = static_cast<double>(split.train.size());
    // The sum-over-samples scale the reference experiment reports: undo the
    // 1/N mean, and the 1/2 as well for the quadratic cost.
    const double paper_scale = loss.tag == gf::Loss::Quadratic ? 2.0 * n : n;
    {
        auto f = open_out(fs::path(rc.out_dir) / "summary.txt");
        f << "steps: " << report.steps_taken << '\n';
        f << "seed: " << rc.seed << '\n';
        f << "train_points: " << split.train.size() << '\n';
        f << "validation_points: " << split.validation.size() << '\n';
        f << "final_train_cost: " << gf::format_real(final_cost) << '\n';
        f << "final_train_cost_paper_scale: " << gf::format_real(final_cost * paper_scale)
          << '\n';
        f << "wall_time_seconds: " << gf::format_real(wall) << '\n';
    }
    std::cout << "trained " << report.steps_taken << " steps, final cost "
              << gf::format_real(final_cost) << " (paper scale "
              << gf::format_real(final_cost * paper_scale) << "), artifacts in " << rc.out_dir
              << "\n";
    return kExitOk;
}

int run_gradcheck(const GradcheckArgs& args) {
    gf::RunConfig rc = gf::parse_config_file(args.config_path);
    if (args.seed) rc.seed = *args.seed;
    gf::NetworkSpec net = gf::build_network(rc.network_desc);
    const gf::LossKind loss = gf::make_loss(rc);
    net = gf::init_params(std::move(net), rc.seed);

    gf::Pcg32 rng = gf::make_rng(rc.seed, gf::RngStream::Sampling);
    gf::Vector x(net.input_dim());
    for (double& v : x) v = rng.uniform_double();
    const std::size_t out_dim = gf::output_dim(net);
    const std::size_t label = rng.uniform_below(static_cast<std::uint32_t>(out_dim));
    gf::Target target;
    if (loss.tag == gf::Loss::Quadratic) {
        gf::Vector y(out_dim, 0.0);
        y[label] = 1.0;
        target = y;
    } else {
        target = label;
    }

    const gf::ForwardTrace trace = gf::forward(net, x);
    gf::GradientBundle bp = gf::backward(net, trace, target, loss);
    const gf::GradientBundle fd = gf::fd_gradient(net, x, target, loss, 1e-6);
    if (args.corrupt && !bp.layers.empty()) {
        for (auto& l : bp.layers)
            if (!l.weights.empty()) {
                l.weights[0] += 1.0;
                break;
            }
    }

    const std::vector<double> per_layer = gf::per_layer_max_rel(bp, fd);
    for (std::size_t l = 0; l < per_layer.size(); ++l)
        std::printf("layer %zu: max relative error %.3e\n", l + 1, per_layer[l]);
    const gf::BundleDiff worst = gf::compare_bundles(bp, fd);
    std::printf("overall: max relative error %.3e\n", worst.max_rel);

    constexpr double kThreshold = 1e-5;
    if (worst.max_rel >= kThreshold) {
        std::fprintf(stderr,
                     "error:%d:gradient check failed: layer %zu %s[%zu] backward %.17g vs "
                     "finite difference %.17g (relative error %.3e >= %.0e)\n",
                     kExitGradcheck, worst.layer + 1, worst.in_weights ? "weights" : "biases",
                     worst.offset, worst.got, worst.want, worst.max_rel, kThreshold);
        return kExitGradcheck;
    }
    return kExitOk;
}

int run_eval(const EvalArgs& args) {
    const gf::NetworkSpec net = gf::load_model(args.model_path);
    const gf::LabeledDataset data =
        dataset_from_selector(args.data, args.n_features, args.num_classes);
    const gf::ConfusionMatrix cm = gf::evaluate(net, data);
    const gf::ConfusionSummary s = gf::summarize(cm);
    std::cout << gf::format_confusion(cm);
    std::printf("overall accuracy: %.1f%%\n", 100.0 * s.overall);
    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        auto f = open_out(fs::path(args.out_dir) / "confusion.csv");
        gf::write_confusion_csv(cm, f);
    }
    return kExitOk;
}

int run_predict(const PredictArgs& args) {
    const gf::NetworkSpec net = gf::load_model(args.model_path);
    for (const std::string& text : args.inputs) {
        gf::Vector x;
        for (const std::string& field : gf::detail::split_on(text, ','))
            x.push_back(gf::parse_real(field, "predict --input"));
        if (x.size() != net.input_dim())
            throw gf::ConfigError("predict: input has " + std::to_string(x.size()) +
                                  " components but model expects " +
                                  std::to_string(net.input_dim()));
        const gf::ForwardTrace trace = gf::forward(net, x);
        const gf::Vector& out = trace.output();
        std::size_t best = 0;
        for (std::size_t i = 1; i < out.size(); ++i)
            if (out[i] > out[best]) best = i;
        std::cout << "class " << best << " outputs ";
        gf::write_csv_reals(std::cout, out);
        std::cout << '\n';
    }
    return kExitOk;
}

int run_boundary(const BoundaryArgs& args) {
    const gf::NetworkSpec net = gf::load_model(args.model_path);
    const std::vector<gf::GridPoint> grid = gf::boundary_grid(net, args.resolution);
    auto f = open_out(args.out_path);
    for (const gf::GridPoint& p : grid) {
        f << gf::format_real(p.x) << ',' << gf::format_real(p.y) << ',' << p.predicted;
        for (double v : p.outputs) f << ',' << gf::format_real(v);
        f << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradforge: train and inspect small neural networks"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a network from a config file");
    train_cmd->add_option("--config", train_args.config_path, "config file")->required();
    train_cmd->add_option("--seed", train_args.seed, "override the config seed");
    train_cmd->add_option("--niter", train_args.niter, "override the iteration budget");
    train_cmd->add_option("--eta", train_args.eta, "override with a constant learning rate");
    train_cmd->add_option("--out", train_args.out_dir, "output directory");
    train_cmd->add_option("--data", train_args.data, "override the data selector");

    GradcheckArgs gradcheck_args;
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "compare backward gradients to finite differences");
    gradcheck_cmd->add_option("--config", gradcheck_args.config_path, "config file")->required();
    gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "override the config seed");
    gradcheck_cmd
        ->add_flag("--corrupt-gradient", gradcheck_args.corrupt,
                   "deliberately corrupt one gradient entry (negative control)")
        ->group(""); // hidden

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "confusion-matrix report for a model");
    eval_cmd->add_option("--model", eval_args.model_path, "model file")->required();
    eval_cmd->add_option("--data", eval_args.data, "toy | toy_extended | CSV path")->required();
    eval_cmd->add_option("--n-features", eval_args.n_features, "CSV feature count");
    eval_cmd->add_option("--classes", eval_args.num_classes, "CSV class count");
    eval_cmd->add_option("--out", eval_args.out_dir, "directory for the CSV twin");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "classify input vectors");
    predict_cmd->add_option("--model", predict_args.model_path, "model file")->required();
    predict_cmd->add_option("--input", predict_args.inputs, "comma-separated input vector")
        ->required();

    BoundaryArgs boundary_args;
    auto* boundary_cmd =
        app.add_subcommand("boundary", "export the decision grid over the unit square");
    boundary_cmd->add_option("--model", boundary_args.model_path, "model file")->required();
    boundary_cmd->add_option("--resolution", boundary_args.resolution, "lattice points per axis");
    boundary_cmd->add_option("--out", boundary_args.out_path, "output CSV path")->required();

    try {
        app.parse(argc, argv);
        if (*train_cmd) return run_train(train_args);
        if (*gradcheck_cmd) return run_gradcheck(gradcheck_args);
        if (*eval_cmd) return run_eval(eval_args);
        if (*predict_cmd) return run_predict(predict_args);
        if (*boundary_cmd) return run_boundary(boundary_args);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::fprintf(stderr, "error:%d:%s\n", kExitConfig, e.what());
        return kExitConfig;
    } catch (const CliError& e) {
        std::fprintf(stderr, "error:%d:%s\n", e.code, e.message.c_str());
        return e.code;
    } catch (const gf::NumericError& e) {
        std::fprintf(stderr, "error:%d:%s\n", kExitDiverged, e.what());
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error:%d:%s\n", kExitConfig, e.what());
        return kExitConfig;
    }
}
