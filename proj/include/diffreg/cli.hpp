/******************************************************************************
 * Copyright 2026 The diffreg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * @file cli.hpp
 *
 * Subcommands of the diffreg tool. Exit codes: 0 success, 1 runtime failure,
 * 2 bad command line.
 *
 *****************************************************************************/

#ifndef DIFFREG_CLI_HPP
#define DIFFREG_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "diffreg/engine.hpp"
#include "diffreg/errors.hpp"
#include "diffreg/image_io.hpp"
#include "diffreg/metrics.hpp"
#include "diffreg/synth.hpp"

namespace diffreg::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline json config_to_json(const RegistrationConfig& c)
{
    return json{{"levels", c.levels},
                {"iterations", c.iterations},
                {"lr", c.lr},
                {"lambda", c.lambda},
                {"alpha", c.alpha()},
                {"gamma", c.gamma()},
                {"loss", to_string(c.loss)},
                {"sigma", c.sigma},
                {"bidirectional", c.bidirectional},
                {"seed", c.seed},
                {"mi_bins", c.mi_bins},
                {"ssim_window", c.ssim_window},
                {"update", c.update == UpdateRule::Compositional ? "compositional" : "additive"}};
}

/// Inverse of config_to_json. alpha/gamma become overrides only when they differ
/// from the values derived from levels and lambda.
inline RegistrationConfig config_from_json(const json& j)
{
    RegistrationConfig c;
    try {
        c.levels = j.value("levels", c.levels);
        c.iterations = j.value("iterations", c.iterations);
        c.lr = j.value("lr", c.lr);
        c.lambda = j.value("lambda", c.lambda);
        c.sigma = j.value("sigma", c.sigma);
        c.bidirectional = j.value("bidirectional", c.bidirectional);
        c.seed = j.value("seed", c.seed);
        c.mi_bins = j.value("mi_bins", c.mi_bins);
        c.ssim_window = j.value("ssim_window", c.ssim_window);
        if (j.contains("loss")) {
            const auto mode = parse_loss_mode(j.at("loss").get<std::string>());
            if (!mode) {
                throw ConfigError("unknown loss mode '" + j.at("loss").get<std::string>() + "'");
            }
            c.loss = *mode;
        }
        if (j.contains("update")) {
            const std::string u = j.at("update").get<std::string>();
            if (u != "compositional" && u != "additive") {
                throw ConfigError("unknown update rule '" + u + "'");
            }
            c.update = u == "additive" ? UpdateRule::Additive : UpdateRule::Compositional;
        }
        if (j.contains("alpha") && j.at("alpha").get<double>() != c.alpha()) {
            c.alpha_override = j.at("alpha").get<double>();
        }
        if (j.contains("gamma") && j.at("gamma").get<double>() != c.gamma()) {
            c.gamma_override = j.at("gamma").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

namespace detail {

inline void write_json(const json& j, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError(path.string() + ": cannot open file for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError(path.string() + ": write failed");
    }
}

inline json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError(path + ": cannot open file");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
}

// Runs `body`, mapping exceptions to exit codes.
template <typename F>
int guarded(CLI::App& app, std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            err << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UndefinedMetric& e) {
        err << "error: undefined metric: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

inline void parse(CLI::App& app, const std::vector<std::string>& args)
{
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
}

inline std::string image_extension(const std::string& path)
{
    return ::diffreg::detail::lower_extension(path) == ".png" ? ".png" : ".pgm";
}

}  // namespace detail

/// register --moving PATH --fixed PATH --out DIR [options]
inline int cmd_register(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Register a moving image onto a fixed image", "diffreg register"};
    std::string moving_path, fixed_path, out_dir, config_path, loss_name;
    RegistrationConfig cfg;
    bool unidirectional = false, verbose = false;
    auto* o_moving = app.add_option("--moving", moving_path, "moving image (PGM or PNG)");
    auto* o_fixed = app.add_option("--fixed", fixed_path, "fixed image (PGM or PNG)");
    app.add_option("--out", out_dir, "output directory")->required();
    auto* o_levels = app.add_option("--levels", cfg.levels, "pyramid levels K")->capture_default_str();
    auto* o_iters = app.add_option("--iters", cfg.iterations, "optimization iterations")->capture_default_str();
    auto* o_lr = app.add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
    auto* o_lambda = app.add_option("--lambda", cfg.lambda, "regularization weight lambda")->capture_default_str();
    auto* o_loss = app.add_option("--loss", loss_name, "similarity: mse, ssim or ssim+mi")
                       ->check(CLI::IsMember({"mse", "ssim", "ssim+mi"}))
                       ->default_str("ssim+mi");
    auto* o_sigma = app.add_option("--sigma", cfg.sigma, "velocity smoothing sigma (pixels)")->capture_default_str();
    auto* o_uni = app.add_flag("--unidirectional", unidirectional, "forward direction only");
    auto* o_seed = app.add_option("--seed", cfg.seed, "network initialization seed")->capture_default_str();
    app.add_option("--config", config_path, "manifest.json of an earlier run; explicit flags take precedence");
    app.add_flag("--verbose", verbose, "print the loss every 100 iterations");

    return detail::guarded(app, err, [&] {
        detail::parse(app, args);
        if (!config_path.empty()) {
            const json manifest = detail::read_json(config_path);
            RegistrationConfig base = config_from_json(manifest.value("config", json::object()));
            const json inputs = manifest.value("inputs", json::object());
            if (!o_moving->count() && inputs.contains("moving")) {
                moving_path = inputs.at("moving").get<std::string>();
            }
            if (!o_fixed->count() && inputs.contains("fixed")) {
                fixed_path = inputs.at("fixed").get<std::string>();
            }
            auto take = [&](CLI::Option* o, auto& dst, const auto& src) {
                if (!o->count()) {
                    dst = src;
                }
            };
            take(o_levels, cfg.levels, base.levels);
            take(o_iters, cfg.iterations, base.iterations);
            take(o_lr, cfg.lr, base.lr);
            take(o_lambda, cfg.lambda, base.lambda);
            take(o_sigma, cfg.sigma, base.sigma);
            take(o_seed, cfg.seed, base.seed);
            take(o_uni, cfg.bidirectional, base.bidirectional);
            if (!o_loss->count()) {
                cfg.loss = base.loss;
            }
            cfg.mi_bins = base.mi_bins;
            cfg.ssim_window = base.ssim_window;
            cfg.update = base.update;
            cfg.alpha_override = base.alpha_override;
            cfg.gamma_override = base.gamma_override;
        }
        if (o_uni->count()) {
            cfg.bidirectional = !unidirectional;
        }
        if (o_loss->count()) {
            cfg.loss = *parse_loss_mode(loss_name);
        }
        if (moving_path.empty() || fixed_path.empty()) {
            throw CLI::RequiredError(moving_path.empty() ? "--moving" : "--fixed");
        }
        cfg.validate();

        const Image2D moving = load_image(moving_path);
        const Image2D fixed = load_image(fixed_path);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);

        ProgressFn progress;
        if (verbose) {
            progress = [&out, n = cfg.iterations](int it, double loss) {
                if (it % 100 == 0 || it + 1 == n) {
                    out << "iteration " << it << " loss " << std::setprecision(8) << loss << std::endl;
                }
            };
        }
        const RegistrationResult r = register_images(moving, fixed, cfg, progress);

        const std::string ext = detail::image_extension(moving_path);
        json outputs;
        json metrics;
        auto emit = [&](const char* key, const std::string& name) { outputs[key] = name; return (dir / name).string(); };
        save_image(r.warped_moving, emit("warped_fwd", "warped_fwd" + ext));
        save_displacement(r.forward, emit("disp_fwd", "disp_fwd.dfld"));
        save_rgb_png(flow_to_color(r.forward), emit("flow_fwd", "flow_fwd.png"));
        metrics["mean_displacement_px"] = mean_displacement_px(r.forward);
        metrics["nonpositive_jacobian_fwd"] = count_nonpositive_jacobian(r.forward);
        if (cfg.bidirectional) {
            save_image(r.warped_fixed, emit("warped_bwd", "warped_bwd" + ext));
            save_displacement(r.backward, emit("disp_bwd", "disp_bwd.dfld"));
            save_rgb_png(flow_to_color(r.backward), emit("flow_bwd", "flow_bwd.png"));
            metrics["mean_displacement_bwd_px"] = mean_displacement_px(r.backward);
            metrics["nonpositive_jacobian_bwd"] = count_nonpositive_jacobian(r.backward);
        }
        metrics["final_loss"] = r.loss_trace.back();

        json manifest{{"command", "register"},
                      {"config", config_to_json(cfg)},
                      {"inputs", {{"moving", moving_path}, {"fixed", fixed_path}}},
                      {"outputs", outputs},
                      {"metrics", metrics},
                      {"loss_trace", r.loss_trace},
                      {"wall_clock_seconds", r.seconds}};
        detail::write_json(manifest, dir / "manifest.json");
        out << "registered in " << std::fixed << std::setprecision(1) << r.seconds << " s, mean displacement "
            << std::setprecision(3) << metrics["mean_displacement_px"].get<double>() << " px\n";
        return kExitOk;
    });
}

/// evaluate --disp PATH --moving-mask PATH --fixed-mask PATH --out report.json [--label N]
inline int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Score a displacement field against segmentation masks", "diffreg evaluate"};
    std::string disp_path, moving_mask_path, fixed_mask_path, report_path;
    int label = 1;
    app.add_option("--disp", disp_path, "DFLD displacement (maps fixed coordinates into the moving image)")
        ->required();
    app.add_option("--moving-mask", moving_mask_path, "moving label mask")->required();
    app.add_option("--fixed-mask", fixed_mask_path, "fixed label mask")->required();
    app.add_option("--out", report_path, "report JSON path")->required();
    app.add_option("--label", label, "label to score")->check(CLI::Range(1, 255))->capture_default_str();

    return detail::guarded(app, err, [&] {
        detail::parse(app, args);
        const Tensor<float> field = load_displacement(disp_path);
        const Mask2D moving = load_mask(moving_mask_path);
        const Mask2D fixed = load_mask(fixed_mask_path);
        if (moving.width != field.shape.w || moving.height != field.shape.h || fixed.width != field.shape.w ||
            fixed.height != field.shape.h) {
            throw ContractViolation("extent mismatch: displacement is " + std::to_string(field.shape.w) + "x" +
                                    std::to_string(field.shape.h) + ", moving mask " + std::to_string(moving.width) +
                                    "x" + std::to_string(moving.height) + ", fixed mask " +
                                    std::to_string(fixed.width) + "x" + std::to_string(fixed.height));
        }
        const EvalReport r = evaluate_registration(field, moving, fixed, {static_cast<std::uint8_t>(label)});
        const json report{{"label", label},
                          {"dice", r.labels.front().dice},
                          {"hausdorff_px", r.labels.front().hausdorff_px},
                          {"nonpositive_jacobian", r.nonpositive_jacobian}};
        detail::write_json(report, report_path);
        out << report.dump() << "\n";
        return kExitOk;
    });
}

/// synth --out DIR [--size 64 --amplitude-px 6 --sigma-px 8 --seed 0 --count 1]
inline int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Generate synthetic pairs with known deformations", "diffreg synth"};
    std::string out_dir;
    int size = 64, count = 1;
    double amplitude = 6.0, sigma = 8.0;
    std::uint64_t seed = 0;
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--size", size, "image side in pixels")->check(CLI::Range(16, 4096))->capture_default_str();
    app.add_option("--amplitude-px", amplitude, "max velocity component (pixels)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--sigma-px", sigma, "velocity smoothing sigma (pixels)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--seed", seed, "first pair seed")->capture_default_str();
    app.add_option("--count", count, "number of pairs")->check(CLI::Range(1, 100000))->capture_default_str();

    return detail::guarded(app, err, [&] {
        detail::parse(app, args);
        if (amplitude > 0.25 * size) {
            throw CLI::ValidationError("--amplitude-px", "must not exceed 0.25 * size = " + std::to_string(0.25 * size));
        }
        const std::filesystem::path dir(out_dir);
        json pairs = json::array();
        for (int i = 0; i < count; ++i) {
            const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
            const SyntheticPair p = make_seeded_pair(s, size, amplitude, sigma);
            char name[32];
            std::snprintf(name, sizeof(name), "pair_%03d", i);
            const auto pd = dir / name;
            std::filesystem::create_directories(pd);
            save_image(p.fixed, (pd / "fixed.pgm").string(), 16);
            save_image(p.moving, (pd / "moving.pgm").string(), 16);
            save_mask(p.fixed_mask, (pd / "fixed_mask.pgm").string());
            save_mask(p.moving_mask, (pd / "moving_mask.pgm").string());
            save_displacement(p.gt_forward, (pd / "gt_fwd.dfld").string());
            save_displacement(p.gt_backward, (pd / "gt_bwd.dfld").string());
            pairs.push_back({{"dir", name},
                             {"seed", s},
                             {"max_velocity_px", max_component_px(p.velocity)},
                             {"gt_nonpositive_jacobian", count_nonpositive_jacobian(p.gt_forward)}});
        }
        const json manifest{{"command", "synth"},
                            {"size", size},
                            {"amplitude_px", amplitude},
                            {"sigma_px", sigma},
                            {"seed", seed},
                            {"count", count},
                            {"labels", {{"pool", kPoolLabel}, {"wall", kWallLabel}}},
                            {"pairs", pairs}};
        detail::write_json(manifest, dir / "manifest.json");
        out << "wrote " << count << " pair(s) to " << dir.string() << "\n";
        return kExitOk;
    });
}

inline std::string usage()
{
    return "usage: diffreg <register|evaluate|synth> [options]\n"
           "  register  --moving PATH --fixed PATH --out DIR [--levels 2] [--iters 800] [--lr 5e-4]\n"
           "            [--lambda 5] [--loss mse|ssim|ssim+mi] [--sigma 1.0] [--unidirectional] [--seed 0]\n"
           "            [--config manifest.json] [--verbose]\n"
           "  evaluate  --disp PATH --moving-mask PATH --fixed-mask PATH --out report.json [--label 1]\n"
           "  synth     --out DIR [--size 64] [--amplitude-px 6] [--sigma-px 8] [--seed 0] [--count 1]\n"
           "run 'diffreg <command> --help' for details\n";
}

/// Dispatches on the first argument (the subcommand).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (args.empty()) {
        err << usage();
        return kExitUsage;
    }
    const std::string& cmd = args.front();
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (cmd == "register") {
        return cmd_register(rest, out, err);
    }
    if (cmd == "evaluate") {
        return cmd_evaluate(rest, out, err);
    }
    if (cmd == "synth") {
        return cmd_synth(rest, out, err);
    }
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
        out << usage();
        return kExitOk;
    }
    err << "error: unknown command '" << cmd << "'\n" << usage();
    return kExitUsage;
}

}  // namespace diffreg::cli

#endif  // DIFFREG_CLI_HPP
