#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nqad/autodecoder.hpp"
#include "nqad/config.hpp"
#include "nqad/error.hpp"
#include "nqad/experiments.hpp"
#include "nqad/manifest.hpp"
#include "nqad/metrics.hpp"
#include "nqad/parallel.hpp"
#include "nqad/pointcloud.hpp"
#include "nqad/rng.hpp"
#include "nqad/trainer.hpp"

namespace fs = std::filesystem;
using namespace nqad;

namespace {

std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

CloudFormat parse_format(const std::string& name) {
    if (name == "xyz_ascii" || name == "xyz") return CloudFormat::xyz_ascii;
    if (name == "ply") return CloudFormat::ply;
    throw UsageError("unknown format '" + name + "' (xyz_ascii | ply)");
}

int auto_depth(size_t m) {
    int depth = 0;
    while ((m >> (depth + 1)) >= 1024) ++depth;
    return depth;
}

struct MetricArgs {
    std::string path_a, path_b;
    std::string kind = "chamfer";
    int depth = -1;
    double epsilon = 1.0;
    uint32_t iterations = 100;
    uint32_t k = 5;
};

int run_metric(const MetricArgs& args) {
    const PointCloud a = load_cloud(args.path_a);
    const PointCloud b = load_cloud(args.path_b);
    std::string depth_col, eps_col, norm_col;
    double value = 0.0;
    if (args.kind == "chamfer") {
        value = chamfer(a, b);
    } else if (args.kind == "aug_chamfer") {
        value = aug_chamfer(a, b);
    } else if (args.kind == "emd") {
        value = emd_exact_mean(a, b);
    } else if (args.kind == "emkd") {
        const int depth = args.depth >= 0 ? args.depth : auto_depth(a.size());
        const MetricReport rep = emkd(a, b, depth, args.epsilon, args.iterations);
        value = rep.value;
        depth_col = std::to_string(depth);
        eps_col = fmt(args.epsilon);
    } else if (args.kind == "nlac") {
        value = normalized_log_aug_chamfer(a, b, args.k);
        norm_col = fmt(sampling_normalizer(b, args.k));
    } else {
        throw UsageError("unknown metric kind '" + args.kind +
                         "' (chamfer | aug_chamfer | emd | emkd | nlac)");
    }
    std::cout << args.kind << "," << fmt(value) << "," << depth_col << "," << eps_col << ","
              << norm_col << "\n";
    return 0;
}

Dataset load_dataset(const std::string& dir, bool normalize) {
    Dataset ds = load_dataset_dir(dir);
    if (normalize)
        for (auto& cloud : ds.clouds) normalize_unit_sphere(cloud);
    return ds;
}

TrainConfig train_config_from_ini(const IniConfig& ini) {
    TrainConfig cfg;
    cfg.epochs = static_cast<uint32_t>(ini.get_int("train", "epochs"));
    cfg.batch_size = static_cast<uint32_t>(ini.get_int_or("train", "batch_size", 16));
    cfg.sample_size = static_cast<uint32_t>(ini.get_int_or("train", "sample_size", 2048));
    cfg.depth = static_cast<int>(ini.get_int_or("train", "depth", 3));
    cfg.epsilon = ini.get_double_or("train", "epsilon", 1.0);
    cfg.max_iterations = static_cast<uint32_t>(ini.get_int_or("train", "max_iterations", 100));
    cfg.loss_kind = loss_kind_from_name(ini.get_or("train", "loss", "aligned_l2"));
    cfg.reassignment = ini.get_bool_or("train", "reassignment", true);
    cfg.lr = ini.get_double_or("train", "lr", 1e-3);
    cfg.seed = static_cast<uint64_t>(ini.get_int_or("train", "seed", 0));
    cfg.checkpoint_interval =
        static_cast<uint32_t>(ini.get_int_or("train", "checkpoint_interval", 0));
    cfg.final_emkd = ini.get_bool_or("train", "final_emkd", false);
    cfg.final_emkd_depth = static_cast<int>(ini.get_int_or("train", "final_emkd_depth", -1));
    cfg.final_emkd_epsilon = ini.get_double_or("train", "final_emkd_epsilon", 1e-3);
    cfg.final_emkd_iterations =
        static_cast<uint32_t>(ini.get_int_or("train", "final_emkd_iterations", 100000));
    cfg.config_echo = ini.echo();
    return cfg;
}

void load_latent_file(FoldingNet& net, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open latent init file '" + path + "'");
    for (uint32_t r = 0; r < net.latent.rows; ++r)
        for (uint32_t c = 0; c < net.latent.cols; ++c)
            if (!(in >> net.latent.at(r, c)))
                throw DataError("latent init file '" + path + "' ended before row " +
                                std::to_string(r) + " col " + std::to_string(c));
}

int run_train(const std::string& config_path, const std::string& resume_path) {
    const IniConfig ini = IniConfig::parse_file(config_path);
    TrainConfig cfg = train_config_from_ini(ini);

    const std::string data_dir = ini.get("data", "dir");
    const bool normalize = ini.get_bool_or("data", "normalize", false);
    const std::string out_dir = ini.get("output", "dir");
    fs::create_directories(out_dir);
    cfg.checkpoint_dir = out_dir;

    Dataset dataset = load_dataset(data_dir, normalize);
    if (cfg.final_emkd && cfg.final_emkd_depth < 0)
        cfg.final_emkd_depth = auto_depth(dataset.points_per_cloud());
    if (cfg.batch_size > dataset.size())
        cfg.batch_size = static_cast<uint32_t>(dataset.size());

    std::vector<ManifestInput> inputs;
    inputs.push_back({config_path, file_digest(config_path)});
    for (const auto& name : dataset.names) {
        const std::string p = (fs::path(data_dir) / name).string();
        inputs.push_back({p, file_digest(p)});
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), "train", cfg.config_echo,
                   cfg.seed, inputs);

    FoldingNet net;
    TrainState state;
    bool fresh = resume_path.empty();
    if (fresh) {
        FoldingNetConfig nc;
        nc.points = static_cast<uint32_t>(dataset.points_per_cloud());
        nc.patches = static_cast<uint32_t>(ini.get_int_or("model", "patches", 16));
        nc.latent_dim = static_cast<uint32_t>(ini.get_int_or("model", "latent", 10));
        nc.instances = static_cast<uint32_t>(dataset.size());
        nc.seed = cfg.seed;
        if (cfg.sample_size > nc.points) cfg.sample_size = nc.points;

        int64_t init_instance = ini.get_int_or("model", "init_instance", -1);
        if (init_instance < 0)
            init_instance = static_cast<int64_t>(Rng(cfg.seed, "init_pick").below(dataset.size()));
        if (init_instance >= static_cast<int64_t>(dataset.size()))
            throw UsageError("model.init_instance out of range");
        net = init_network(nc, dataset.clouds[init_instance]);
        if (ini.has("model", "latent_init_file"))
            load_latent_file(net, ini.get("model", "latent_init_file"));
        state = make_train_state(dataset, net, cfg);
    } else {
        Checkpoint ck = load_checkpoint(resume_path);
        if (ck.meta.config_echo != cfg.config_echo)
            std::cerr << "warning: resuming with a config that differs from the checkpoint\n";
        net = std::move(ck.net);
        state = train_state_from_checkpoint(dataset, std::move(ck));
    }

    const std::string log_path = (fs::path(out_dir) / "log.csv").string();
    std::ofstream log;
    if (fresh) {
        log.open(log_path, std::ios::trunc);
        log << "epoch,batch,loss,swaps,elapsed_ms\n";
    } else {
        log.open(log_path, std::ios::app);
    }
    if (!log) throw DataError("cannot open log '" + log_path + "'");

    const TrainReport report = train(dataset, net, state, cfg, &log);
    if (!report.epoch_loss.empty())
        std::cout << "final_epoch_loss," << fmt(report.epoch_loss.back()) << "\n";
    if (cfg.final_emkd) std::cout << "final_emkd_mean," << fmt(report.final_emkd_mean) << "\n";
    std::cout << "checkpoint," << (fs::path(out_dir) / "checkpoint_final.nqad").string() << "\n";
    return 0;
}

int run_reconstruct(const std::string& ckpt_path, uint32_t instance, const std::string& out_path,
                    const std::string& format) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (instance >= ck.net.config.instances)
        throw UsageError("instance " + std::to_string(instance) + " out of range (N=" +
                         std::to_string(ck.net.config.instances) + ")");
    std::vector<uint32_t> all(ck.net.config.points);
    std::iota(all.begin(), all.end(), 0);
    PointCloud recon;
    recon.pts = predict_points(ck.net, instance, all);
    save_cloud(recon, out_path, format.empty() ? format_for_path(out_path) : parse_format(format));
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, int depth, double epsilon,
             uint32_t iterations, bool normalize) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const Dataset dataset = load_dataset(data_dir, normalize);
    const int d = depth >= 0 ? depth : auto_depth(dataset.points_per_cloud());
    const EmkdEvaluation eval = evaluate_emkd(dataset, ck.net, d, epsilon, iterations);
    std::cout << "instance,name,emkd\n";
    for (size_t i = 0; i < eval.per_instance.size(); ++i)
        std::cout << i << "," << dataset.names[i] << "," << fmt(eval.per_instance[i]) << "\n";
    std::cout << "mean,," << fmt(eval.mean) << "\n";
    return 0;
}

int run_study(const std::string& config_path) {
    const IniConfig ini = IniConfig::parse_file(config_path);
    ChamferStudyConfig cfg;
    cfg.seed = static_cast<uint64_t>(ini.get_int_or("study", "seed", 0));

    std::vector<ManifestInput> inputs;
    inputs.push_back({config_path, file_digest(config_path)});
    if (ini.has("study", "target_file")) {
        const std::string f = ini.get("study", "target_file");
        cfg.target = load_cloud(f);
        inputs.push_back({f, file_digest(f)});
    } else {
        cfg.target = gen_synthetic(
            synthetic_kind_from_name(ini.get_or("study", "target_kind", "two_scale_teeth")),
            static_cast<uint32_t>(ini.get_int_or("study", "target_m", 8192)),
            static_cast<uint64_t>(ini.get_int_or("study", "target_seed", 0)));
    }
    cfg.steps = static_cast<uint32_t>(ini.get_int_or("study", "steps", 2000));
    cfg.lr = ini.get_double_or("study", "lr", 0.02);
    cfg.k = static_cast<uint32_t>(ini.get_int_or("study", "k", 5));

    cfg.fractions.clear();
    std::istringstream fr(ini.get_or("study", "fractions", "1.0,0.1,0.01"));
    std::string tok;
    while (std::getline(fr, tok, ',')) cfg.fractions.push_back(std::stod(tok));

    std::vector<StudyObjective> objectives;
    std::istringstream ob(ini.get_or("study", "objectives", "aug_chamfer_direct"));
    while (std::getline(ob, tok, ',')) objectives.push_back(study_objective_from_name(tok));

    const std::string out_dir = ini.get("output", "dir");
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), "study", ini.echo(), cfg.seed,
                   inputs);

    std::ofstream csv((fs::path(out_dir) / "study.csv").string(), std::ios::trunc);
    if (!csv) throw DataError("cannot write study csv");
    csv << "step,objective,fraction,value\n";
    for (StudyObjective obj : objectives) {
        cfg.objective = obj;
        for (const StudyCurve& curve : chamfer_study(cfg)) {
            for (size_t s = 0; s < curve.values.size(); ++s)
                csv << s << "," << study_objective_name(curve.objective) << ","
                    << fmt(curve.fraction) << "," << fmt(curve.values[s]) << "\n";
        }
    }
    std::cout << "study_csv," << (fs::path(out_dir) / "study.csv").string() << "\n";
    return 0;
}

int run_gen(const std::string& kind, uint32_t m, uint64_t seed, const std::string& out_path,
            const std::string& format, bool normalize) {
    PointCloud cloud = gen_synthetic(synthetic_kind_from_name(kind), m, seed);
    if (normalize) normalize_unit_sphere(cloud);
    save_cloud(cloud, out_path, format.empty() ? format_for_path(out_path) : parse_format(format));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NeuralQAAD: point cloud compression via folding autodecoders and QAP matching"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: logical cores)");

    MetricArgs margs;
    auto* metric = app.add_subcommand("metric", "similarity between two point clouds (CSV row)");
    metric->add_option("cloud_a", margs.path_a)->required();
    metric->add_option("cloud_b", margs.path_b)->required();
    metric->add_option("--kind", margs.kind, "chamfer | aug_chamfer | emd | emkd | nlac");
    metric->add_option("--depth", margs.depth, "emkd partition depth (default: leaf size 1024)");
    metric->add_option("--epsilon", margs.epsilon, "auction bid increment");
    metric->add_option("--iterations", margs.iterations, "auction round cap");
    metric->add_option("--k", margs.k, "neighbors for the sampling normalizer");

    std::string train_config, resume;
    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    train_cmd->add_option("config", train_config)->required();
    train_cmd->add_option("--resume", resume, "checkpoint to continue from");

    std::string rec_ckpt, rec_out, rec_format;
    uint32_t rec_instance = 0;
    auto* rec = app.add_subcommand("reconstruct", "decode one instance to a cloud file");
    rec->add_option("checkpoint", rec_ckpt)->required();
    rec->add_option("instance", rec_instance)->required();
    rec->add_option("out", rec_out)->required();
    rec->add_option("--format", rec_format, "xyz_ascii | ply");

    std::string eval_ckpt, eval_dir;
    int eval_depth = -1;
    double eval_eps = 1e-3;
    uint32_t eval_iters = 100000;
    bool eval_norm = false;
    auto* eval_cmd = app.add_subcommand("eval", "per-instance EM-kD of reconstructions");
    eval_cmd->add_option("checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("dataset", eval_dir)->required();
    eval_cmd->add_option("--depth", eval_depth);
    eval_cmd->add_option("--epsilon", eval_eps);
    eval_cmd->add_option("--iterations", eval_iters);
    eval_cmd->add_flag("--normalize", eval_norm, "unit-sphere normalize clouds like training");

    std::string study_config;
    auto* study_cmd = app.add_subcommand("study", "sampling-pathology study (CSV curves)");
    study_cmd->add_option("config", study_config)->required();

    std::string gen_kind, gen_out, gen_format;
    uint32_t gen_m = 0;
    uint64_t gen_seed = 0;
    bool gen_norm = false;
    auto* gen_cmd = app.add_subcommand("gen", "write a synthetic cloud");
    gen_cmd->add_option("kind", gen_kind, "grid_cube | two_scale_teeth | gaussian_blobs")
        ->required();
    gen_cmd->add_option("m", gen_m)->required();
    gen_cmd->add_option("out", gen_out)->required();
    gen_cmd->add_option("--seed", gen_seed);
    gen_cmd->add_option("--format", gen_format, "xyz_ascii | ply");
    gen_cmd->add_flag("--normalize", gen_norm);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (threads > 0) set_thread_count(threads);

    try {
        if (*metric) return run_metric(margs);
        if (*train_cmd) return run_train(train_config, resume);
        if (*rec) return run_reconstruct(rec_ckpt, rec_instance, rec_out, rec_format);
        if (*eval_cmd)
            return run_eval(eval_ckpt, eval_dir, eval_depth, eval_eps, eval_iters, eval_norm);
        if (*study_cmd) return run_study(study_config);
        if (*gen_cmd) return run_gen(gen_kind, gen_m, gen_seed, gen_out, gen_format, gen_norm);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
