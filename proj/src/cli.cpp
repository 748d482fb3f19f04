#include "voxsr/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"
#include "voxsr/volume_io.hpp"

namespace voxsr::cli {

namespace fs = std::filesystem;

bool RunConfig::given(const char* section, const char* key) const {
    auto it = source.find(section);
    return it != source.end() && it->is_object() && it->contains(key);
}

RunConfig parse_run_config(const nlohmann::json& j) {
    reject_unknown_keys(j, {"synth", "generator", "discriminator", "hyperparams", "superres", "eval"}, "config");
    RunConfig c;
    c.source = j;
    auto section = [&](const char* key, auto& target) {
        if (auto it = j.find(key); it != j.end()) it->get_to(target);
    };
    section("synth", c.synth);
    section("generator", c.generator);
    section("discriminator", c.discriminator);
    section("hyperparams", c.hyperparams);
    section("superres", c.superres);
    section("eval", c.eval);
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
    return {{"synth", c.synth},         {"generator", c.generator}, {"discriminator", c.discriminator},
            {"hyperparams", c.hyperparams}, {"superres", c.superres},   {"eval", c.eval}};
}

void override_seed(RunConfig& c, std::uint64_t seed) {
    c.synth.seed = seed;
    c.hyperparams.seed = seed;
    c.superres.seed = seed;
    c.eval.seed = seed;
}

namespace {

void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".voxsr_write_test";
    {
        std::ofstream f(probe);
        if (!f) throw DataError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void echo_config(const fs::path& dir, const std::string& command, const RunConfig& cfg, nlohmann::json inputs) {
    const nlohmann::json j = {{"command", command}, {"inputs", std::move(inputs)}, {"config", to_json(cfg)}};
    write_text(dir / "effective_config.json", j.dump(2) + "\n");
}

SegmentedImage2D mid_slice(const SegmentedVolume& v) {
    const Dims3 d = v.dims();
    SegmentedImage2D img(d.nx, d.ny, v.phase_count());
    for (int x = 0; x < d.nx; ++x)
        for (int y = 0; y < d.ny; ++y) img.set(x, y, v.at(x, y, d.nz / 2));
    return img;
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
    prepare_out_dir(out_dir);
    echo_config(out_dir, "synth", cfg, nlohmann::json::object());
    const SynthSpec& s = cfg.synth;
    const SegmentedVolume hr = generate_hr(s);
    const SegmentedVolume lr = derive_lr(hr, s.lr_mislabel_rate, splitmix64(s.seed ^ 0x6c72ULL));
    write_svol(out_dir / "hr.svol", hr);
    write_svol(out_dir / "lr.svol", lr);
    Rng rng(splitmix64(s.seed ^ 0x706f6f6cULL));
    const auto pool = extract_hr_pool(hr, s.pool_count, s.pool_side, rng);
    if (!pool.empty()) write_svol(out_dir / "hr_pool.svol", pack_images(pool, hr.voxel_size()));
    write_pgm(out_dir / "hr_mid_xy.pgm", mid_slice(hr));
    write_pgm(out_dir / "lr_mid_xy.pgm", mid_slice(lr));
    for (std::size_t i = 0; i < std::min<std::size_t>(pool.size(), 4); ++i)
        write_pgm(out_dir / ("hr_pool_" + std::to_string(i) + ".pgm"), pool[i]);
}

TrainState cmd_train(const RunConfig& cfg, const TrainArgs& args, const fs::path& out_dir) {
    prepare_out_dir(out_dir);
    nlohmann::json inputs = {{"lr", args.lr.string()}, {"hr_pool", args.hr_pool.string()}};
    if (args.resume) inputs["resume"] = args.resume->string();

    const SegmentedVolume lr = read_svol(args.lr);
    const SegmentedVolume stack = read_svol(args.hr_pool);
    TrainData data(lr, augment_pool(unpack_images(stack)));

    auto build = [&]() {
        if (args.resume) {
            TrainState st = load_checkpoint(*args.resume);
            if (cfg.given("hyperparams", "epochs")) st.hp.epochs = cfg.hyperparams.epochs;
            return st;
        }
        GeneratorConfig gc = cfg.generator;
        DiscriminatorConfig dc = cfg.discriminator;
        if (!cfg.given("generator", "phase_count")) gc.phase_count = lr.phase_count();
        if (!cfg.given("discriminator", "phase_count")) dc.phase_count = gc.phase_count;
        if (!cfg.given("discriminator", "input_side")) dc.input_side = gc.output_side();
        return TrainState(gc, dc, cfg.hyperparams);
    };
    TrainState st = build();

    RunConfig effective = cfg;
    effective.generator = st.g.config();
    effective.discriminator = st.d.config();
    effective.hyperparams = st.hp;
    echo_config(out_dir, "train", effective, inputs);

    train_loop(st, data, {out_dir, {}});
    save_checkpoint(out_dir / "final.vsrw", st);
    return st;
}

SuperresResult cmd_superres(const RunConfig& cfg, const SuperresArgs& args, const fs::path& out_dir) {
    prepare_out_dir(out_dir);
    echo_config(out_dir, "superres", cfg,
                {{"checkpoint", args.checkpoint.string()}, {"input", args.input.string()}});
    TrainState st = load_checkpoint(args.checkpoint);
    const SegmentedVolume lr = read_svol(args.input);
    SuperresResult r = super_resolve(st.g, lr, cfg.superres);
    write_svol(out_dir / "sr.svol", r.sr);
    write_pgm(out_dir / "sr_mid_xy.pgm", mid_slice(r.sr));
    return r;
}

EvalInput parse_eval_input(const std::string& text, bool images) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected name=path[:side], got '" + text + "'");
    EvalInput in;
    in.name = text.substr(0, eq);
    std::string rest = text.substr(eq + 1);
    if (const auto colon = rest.rfind(':'); colon != std::string::npos) {
        const std::string side = rest.substr(colon + 1);
        if (!side.empty() && side.find_first_not_of("0123456789") == std::string::npos) {
            in.patch_side = std::stoi(side);
            rest = rest.substr(0, colon);
        }
    }
    in.path = rest;
    in.images = images;
    return in;
}

std::vector<MetricReport> cmd_eval(const RunConfig& cfg, const std::vector<EvalInput>& inputs,
                                   const fs::path& out_dir) {
    if (inputs.empty()) throw ConfigError("eval needs at least one --volume or --images input");
    prepare_out_dir(out_dir);
    nlohmann::json echo = nlohmann::json::array();
    for (const auto& in : inputs)
        echo.push_back({{"name", in.name},
                        {"path", in.path.string()},
                        {"images", in.images},
                        {"patch_side", in.patch_side ? nlohmann::json(*in.patch_side) : nlohmann::json()}});
    echo_config(out_dir, "eval", cfg, echo);

    std::vector<MetricReport> reports;
    for (const auto& in : inputs) {
        if (in.path.empty()) throw DataError("input '" + in.name + "' has an empty path");
        const SegmentedVolume v = read_svol(in.path);
        std::vector<SegmentedVolume> dataset;
        if (in.images) {
            for (const auto& img : unpack_images(v))
                dataset.emplace_back(Dims3{1, img.nx(), img.ny()}, img.phase_count(), v.voxel_size(),
                                     std::vector<Label>(img.labels().begin(), img.labels().end()));
        } else {
            dataset.push_back(v);
        }
        EvalSpec spec = cfg.eval;
        if (in.patch_side) spec.patch_side = *in.patch_side;
        reports.push_back(evaluate(dataset, in.name, spec));
        write_text(out_dir / (in.name + "_metrics.json"), report_json(reports.back()).dump(2) + "\n");
        write_text(out_dir / (in.name + "_metrics.csv"), report_csv(reports.back()));
    }

    // S2 of every dataset at the physical lags of the finest one.
    const MetricReport* finest = &reports.front();
    for (const auto& r : reports)
        if (r.voxel_size < finest->voxel_size) finest = &r;
    std::string csv = "distance_um";
    for (const auto& r : reports)
        for (int p = 0; p < r.phase_count; ++p) csv += "," + r.name + "_s2_phase" + std::to_string(p);
    csv += "\n";
    char buf[64];
    for (std::size_t l = 0; l < finest->s2.front().s2.size(); ++l) {
        const double dist = static_cast<double>(l) * finest->voxel_size;
        std::snprintf(buf, sizeof buf, "%.17g", dist);
        csv += buf;
        for (const auto& r : reports)
            for (int p = 0; p < r.phase_count; ++p) {
                csv += ",";
                const auto& curve = r.s2[p].s2;
                if (dist <= r.voxel_size * static_cast<double>(curve.size() - 1) + 1e-12) {
                    std::snprintf(buf, sizeof buf, "%.17g", s2_at_distance(curve, r.voxel_size, dist));
                    csv += buf;
                }
            }
        csv += "\n";
    }
    write_text(out_dir / "s2_physical.csv", csv);
    return reports;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Segmented micro-CT super-resolution with a 3D generator and 2D critic"};
    app.fallthrough();
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "Seed for every random stream");
    app.add_option("--out-dir", out_dir, "Output directory");

    auto* synth = app.add_subcommand("synth", "Generate synthetic HR/LR volumes and an HR slice pool");

    auto* train = app.add_subcommand("train", "Train the generator and critic");
    TrainArgs targs;
    std::string resume;
    train->add_option("--lr", targs.lr, "LR volume (SVOL)")->required();
    train->add_option("--hr-pool", targs.hr_pool, "HR 2D image stack (SVOL)")->required();
    train->add_option("--resume", resume, "Checkpoint to resume from");

    auto* sres = app.add_subcommand("superres", "Super-resolve an LR volume in tiles");
    SuperresArgs sargs;
    std::optional<int> tile_side, halo, median_iterations;
    sres->add_option("--checkpoint", sargs.checkpoint, "Trained checkpoint")->required();
    sres->add_option("--input", sargs.input, "LR volume (SVOL)")->required();
    sres->add_option("--tile-side", tile_side, "LR tile side");
    sres->add_option("--halo", halo, "Tile halo in LR voxels");
    sres->add_option("--median-iterations", median_iterations, "Median filter passes");

    auto* eval = app.add_subcommand("eval", "Compute metric reports");
    std::vector<std::string> volumes, images;
    eval->add_option("--volume", volumes, "name=path[:patch_side] of a 3D volume");
    eval->add_option("--images", images, "name=path[:patch_side] of a 2D image stack");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) override_seed(cfg, *seed);
        if (*synth) {
            cmd_synth(cfg, out_dir);
            out << "wrote hr.svol, lr.svol, hr_pool.svol to " << out_dir << "\n";
        } else if (*train) {
            if (!resume.empty()) targs.resume = resume;
            const TrainState st = cmd_train(cfg, targs, out_dir);
            out << "trained " << st.epoch << " epochs (" << st.iter << " iterations); checkpoints in " << out_dir
                << "\n";
        } else if (*sres) {
            if (tile_side) cfg.superres.tile_side = *tile_side;
            if (halo) cfg.superres.halo = *halo;
            if (median_iterations) cfg.superres.median_iterations = *median_iterations;
            cfg.superres.validate();
            const auto r = cmd_superres(cfg, sargs, out_dir);
            const Dims3 d = r.sr.dims();
            out << "wrote sr.svol " << d.nx << "x" << d.ny << "x" << d.nz << " from " << r.tiles << " tiles\n";
        } else if (*eval) {
            std::vector<EvalInput> inputs;
            for (const auto& v : volumes) inputs.push_back(parse_eval_input(v, false));
            for (const auto& v : images) inputs.push_back(parse_eval_input(v, true));
            for (const auto& r : cmd_eval(cfg, inputs, out_dir)) {
                out << r.name << ": volume fractions";
                for (double f : r.volume_fraction) out << " " << f;
                out << "\n";
            }
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace voxsr::cli
