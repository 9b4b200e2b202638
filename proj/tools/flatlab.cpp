// flatlab -- command line front end: constructions, sharpness verification,
// training runs, neuron reports, seed sweeps and SVG plots.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "flatlab/analysis.hpp"
#include "flatlab/constructions.hpp"
#include "flatlab/io.hpp"
#include "flatlab/plot.hpp"
#include "flatlab/presets.hpp"
#include "flatlab/rng.hpp"
#include "flatlab/runner.hpp"
#include "flatlab/sharpness.hpp"

using namespace flatlab;

namespace {

struct ConstructArgs {
    std::string kind;
    int d = 10;
    std::size_t n = 40;
    std::uint64_t seed = 0;
    std::string out = "checkpoint.txt";
    double ln_eps = 1.0;
    double scale = 100.0; // sim-BN first-layer scale
    int depth = 2;
};

int run_construct(const ConstructArgs& a) {
    LabeledDataset train, eval;
    ArchSpec spec;
    ModelParams params;
    if (a.kind == "memorize_bias") {
        train = sample_xor(a.d, a.n, a.seed, true);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = memorize_bias(train, 0.0, a.depth);
        spec = {ArchKind::Bias, a.depth, static_cast<int>(a.n), a.d, Activation::Relu, 0.0};
    } else if (a.kind == "good_xor_bias") {
        train = sample_xor(a.d, a.n, a.seed, true);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = good_xor_bias(a.d);
        spec = {ArchKind::Bias, 2, 4, a.d, Activation::Relu, 0.0};
    } else if (a.kind == "memorize_simln") {
        train = sample_xor(a.d, a.n, a.seed, true);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = memorize_simln(train, a.ln_eps);
        spec = {ArchKind::SimLN, 2, static_cast<int>(a.n), a.d, Activation::Relu, a.ln_eps};
    } else if (a.kind == "bad_simln_xor") {
        train = sample_xor(a.d, a.n, a.seed, true);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = bad_simln_xor(train, a.ln_eps);
        spec = {ArchKind::SimLN, 2, static_cast<int>(a.n), a.d, Activation::Relu, a.ln_eps};
    } else if (a.kind == "good_simln_xor") {
        train = sample_xor(a.d, a.n, a.seed, true);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = good_simln_xor(a.d, a.ln_eps);
        spec = {ArchKind::SimLN, 2, 4, a.d, Activation::Relu, a.ln_eps};
    } else if (a.kind == "good_sbn_xor") {
        train = build_complete_xor_set(a.d);
        eval = make_xor_test_set(a.d, derive_seed(a.seed, 1));
        params = good_sbn_xor(train, a.scale);
        spec = {ArchKind::SimBN, 2, 4, a.d, Activation::Relu, 0.0};
    } else if (a.kind == "good_circle") {
        auto fn = [](double x, double) { return x; };
        train = sample_circle(a.n, fn, 1.0, 2, a.seed);
        eval = sample_circle(10000, fn, 1.0, 2, derive_seed(a.seed, 1));
        params = good_circle(train, 1.0);
        spec = {ArchKind::Bias, 2, static_cast<int>(params.W[1].size()), 2, Activation::Relu, 0.0};
    } else {
        std::cerr << "unknown construction kind: " << a.kind << "\n"
                  << "known: memorize_bias good_xor_bias memorize_simln bad_simln_xor "
                     "good_simln_xor good_sbn_xor good_circle\n";
        return 2;
    }
    save_checkpoint(spec, params, a.out);
    const auto cert = certify(spec, params, train, eval);
    std::cout << certificate_csv_header() << "\n" << certificate_csv_row(a.kind, cert) << "\n";
    std::cerr << "checkpoint written to " << a.out << "\n";
    return 0;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv, ArchSpec& spec,
                            int& n, std::string& data_kind, InitScale& init) {
    auto get = [&](const std::string& key, const std::string& fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };
    spec.kind = arch_from_string(get("arch", "nobias"));
    spec.depth = std::stoi(get("depth", "2"));
    spec.width = std::stoi(get("m", "100"));
    spec.input_dim = std::stoi(get("d", "30"));
    spec.act = activation_from_string(get("act", "relu"));
    spec.ln_epsilon = spec.kind == ArchKind::SimLN ? std::stod(get("ln_eps", "0.01")) : 0.0;
    n = std::stoi(get("n", "100"));
    data_kind = get("data", "xor");
    const std::string init_str = get("init", "uniform-fanin");
    init = init_str == "simln-downscale" ? InitScale::SimlnDownscale
           : init_str == "he"            ? InitScale::He
                                         : InitScale::UniformFanin;

    TrainConfig cfg;
    cfg.loss = loss_from_string(get("loss", "mse"));
    cfg.lr = std::stod(get("lr", "0.01"));
    cfg.weight_decay = std::stod(get("wd", "0"));
    cfg.sam_rho = std::stod(get("rho", "0"));
    cfg.batch_size = std::stoi(get("batch", "1"));
    cfg.epochs = std::stol(get("epochs", "1000"));
    if (kv.count("proj_radius")) cfg.projection_radius = std::stod(kv.at("proj_radius"));
    cfg.seed = std::stoull(get("seed", "0"));
    cfg.log_every = std::stol(get("log_every", "100"));
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatlab: flattest-minimizer laboratory for two-layer relu networks"};
    app.require_subcommand(1);

    // construct
    ConstructArgs cargs;
    auto* construct = app.add_subcommand("construct", "emit a closed-form construction checkpoint");
    construct->add_option("--kind", cargs.kind, "construction name")->required();
    construct->add_option("--d", cargs.d, "input dimension");
    construct->add_option("--n", cargs.n, "training points");
    construct->add_option("--seed", cargs.seed, "rng seed");
    construct->add_option("--out", cargs.out, "checkpoint path");
    construct->add_option("--ln-eps", cargs.ln_eps, "sim-LN epsilon");
    construct->add_option("--scale", cargs.scale, "sim-BN first-layer scale");
    construct->add_option("--depth", cargs.depth, "depth (memorize_bias)");

    // verify
    int vd = 10;
    std::size_t vn = 40;
    std::uint64_t vseed = 0;
    std::string vcheckpoint, vdata, vloss = "mse", vout;
    auto* verify = app.add_subcommand("verify",
                                      "construction certificates, or a sharpness report for a checkpoint");
    verify->add_option("--d", vd, "construction dimension");
    verify->add_option("--n", vn, "construction sample count");
    verify->add_option("--seed", vseed, "rng seed");
    verify->add_option("--checkpoint", vcheckpoint, "checkpoint to report on");
    verify->add_option("--data", vdata, "dataset csv for the checkpoint");
    verify->add_option("--loss", vloss, "loss (mse | truncated:<c> | logistic:<p>)");
    verify->add_option("--out", vout, "write the certificate table as csv");

    // train
    std::string tconfig, tpreset;
    double tscale = 0.2;
    std::uint64_t tseed = 0;
    auto* train_cmd = app.add_subcommand("train", "train from a config file or a preset");
    train_cmd->add_option("--config", tconfig, "flat key=value config file");
    train_cmd->add_option("--preset", tpreset, "preset id (see `preset list`)");
    train_cmd->add_option("--scale", tscale, "epoch scale in (0,1]");
    train_cmd->add_option("--seed", tseed, "rng seed");

    // report
    std::string rcheckpoint;
    int rtopk = 4;
    auto* report = app.add_subcommand("report", "neuron report for a depth-2 checkpoint");
    report->add_option("--checkpoint", rcheckpoint, "checkpoint path")->required();
    report->add_option("--top-k", rtopk, "rows to report");

    // sweep
    std::string spreset;
    double sscale = 0.2;
    std::string sseeds = "0,1,2";
    int sthreads = 2;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a preset over several seeds in parallel");
    sweep_cmd->add_option("--preset", spreset, "preset id")->required();
    sweep_cmd->add_option("--scale", sscale, "epoch scale");
    sweep_cmd->add_option("--seeds", sseeds, "comma-separated seeds");
    sweep_cmd->add_option("--threads", sthreads, "worker threads");

    // preset
    auto* preset_cmd = app.add_subcommand("preset", "preset utilities");
    auto* preset_list = preset_cmd->add_subcommand("list", "list presets and their stages");

    // plot
    std::string pcsv, pout, pcols = "train_loss";
    bool plogy = false;
    auto* plot_cmd = app.add_subcommand("plot", "render csv columns to an svg line chart");
    plot_cmd->add_option("--csv", pcsv, "input csv")->required();
    plot_cmd->add_option("--columns", pcols, "comma-separated y columns");
    plot_cmd->add_option("--out", pout, "output svg")->required();
    plot_cmd->add_flag("--logy", plogy, "log-scale y axis");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*construct) return run_construct(cargs);

        if (*verify) {
            if (!vcheckpoint.empty()) {
                if (vdata.empty()) {
                    std::cerr << "verify --checkpoint needs --data <csv>\n";
                    return 2;
                }
                auto [spec, params] = load_checkpoint(vcheckpoint);
                const LabeledDataset data = load_dataset_csv(vdata);
                const auto rep = sharpness_report(spec, params, data, loss_from_string(vloss));
                std::cout << report_csv_header() << "\n" << report_csv_row(rep) << "\n\n"
                          << report_summary(rep);
                return 0;
            }
            const VerifyReport rep = verify_all(vd, vn, vseed);
            std::cout << rep.table();
            if (!vout.empty()) {
                std::ofstream out(vout);
                out << rep.csv();
            }
            return rep.all_pass ? 0 : 1;
        }

        if (*train_cmd) {
            if (!tpreset.empty()) {
                const RunResult r = run_preset(tpreset, tscale, tseed);
                std::cout << "run directory: " << r.dir << "\n";
                if (!r.log.rows.empty()) {
                    const auto& last = r.log.rows.back();
                    std::cout << "final epoch " << last.epoch << ": train_loss " << last.train_loss
                              << ", zero_one " << last.zero_one_error << ", hutchinson "
                              << last.hutchinson_trace << "\n";
                }
                return r.log.diverged ? 1 : 0;
            }
            if (tconfig.empty()) {
                std::cerr << "train needs --preset or --config\n";
                return 2;
            }
            const auto kv = load_config(tconfig);
            if (kv.count("preset")) {
                const RunResult r = run_preset(kv.at("preset"), tscale, tseed);
                std::cout << "run directory: " << r.dir << "\n";
                return r.log.diverged ? 1 : 0;
            }
            ArchSpec spec;
            int n = 100;
            std::string data_kind;
            InitScale init;
            TrainConfig cfg = config_from_map(kv, spec, n, data_kind, init);
            spec.validate();
            LabeledDataset train_set, test_set;
            if (data_kind == "ball") {
                train_set = sample_uniform_ball(spec.input_dim, n, cfg.seed);
                test_set = sample_uniform_ball(spec.input_dim, 10000, derive_seed(cfg.seed, 0x7e57));
            } else {
                train_set = sample_xor(spec.input_dim, n, cfg.seed);
                test_set = make_xor_test_set(spec.input_dim, derive_seed(cfg.seed, 0x7e57));
            }
            TrainResult tr = train(spec, init_params(spec, init, cfg.seed), train_set, test_set, cfg);
            const std::filesystem::path dir = output_root();
            std::filesystem::create_directories(dir);
            save_trajectory_csv(tr.log, (dir / "trajectory.csv").string());
            save_checkpoint(spec, tr.params, (dir / "checkpoint.txt").string());
            std::cout << "trajectory and checkpoint written under " << dir.string() << "\n";
            return tr.log.diverged ? 1 : 0;
        }

        if (*report) {
            auto [spec, params] = load_checkpoint(rcheckpoint);
            const auto rep = neuron_report(spec, params, rtopk);
            std::cout << neuron_report_text(rep) << "\n" << neuron_report_csv(rep);
            return 0;
        }

        if (*sweep_cmd) {
            std::vector<std::uint64_t> seeds;
            std::stringstream ss(sseeds);
            std::string tok;
            while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
            const auto dirs = sweep(spreset, sscale, seeds, sthreads);
            for (const auto& d : dirs) std::cout << d << "\n";
            return 0;
        }

        if (*preset_cmd) {
            if (*preset_list || preset_cmd->get_subcommands().empty())
                std::cout << preset_table();
            return 0;
        }

        if (*plot_cmd) {
            std::vector<std::string> cols;
            std::stringstream ss(pcols);
            std::string tok;
            while (std::getline(ss, tok, ',')) cols.push_back(tok);
            PlotOptions opts;
            opts.log_y = plogy;
            emit_plot(pcsv, cols, pout, opts);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
