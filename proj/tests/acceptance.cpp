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
 * @file acceptance.cpp
 *
 *****************************************************************************/

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Runs the synthetic registration suite with default settings, so it takes
// roughly an hour on one core. `--pairs N` shortens the suite for local checks.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "diffreg/cli.hpp"
#include "diffreg/engine.hpp"
#include "diffreg/metrics.hpp"
#include "diffreg/runtime.hpp"
#include "diffreg/synth.hpp"
#include "metric_examples.hpp"
#include "test_support.hpp"

using namespace diffreg;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 64;
constexpr double kAmplitudePx = 6.0;
constexpr double kSigmaPx = 8.0;
constexpr int kInteriorMargin = 4;

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4)
{
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- gradient correctness ----------------------------------------------------

struct GradOp {
    std::string name;
    bool elementwise = false;
    std::function<testing::GradCheck(std::uint64_t)> run;
};

template <typename Build>
testing::GradCheck check32(const std::vector<Tensor<double>>& in, Build build, const std::vector<bool>& which = {})
{
    return testing::check_gradient<float>(in, build, 1e-6, which);
}

Tensor<double> uniform(Shape s, std::uint64_t seed, double lo, double hi)
{
    return testing::random_tensor(s, seed, lo, hi);
}

std::vector<GradOp> gradient_ops()
{
    const Shape img{1, 1, 16, 16};
    const Shape field{1, 2, 16, 16};
    std::vector<GradOp> ops;
    ops.push_back({"conv2d", false, [=](std::uint64_t s) {
                       return check32({uniform(Shape{1, 2, 16, 16}, s, -1, 1), uniform(Shape{3, 2, 5, 5}, s + 1, -0.5, 0.5),
                                       uniform(Shape{1, 1, 1, 3}, s + 2, -0.5, 0.5)},
                                      [s](auto&, const auto& v) {
                                          return testing::weighted_sum(conv2d(v[0], v[1], v[2], 2), s + 3);
                                      });
                   }});
    ops.push_back({"relu", true, [=](std::uint64_t s) {
                       return check32({uniform(img, s, -1, 1)},
                                      [s](auto&, const auto& v) { return testing::weighted_sum(relu(v[0]), s + 1); });
                   }});
    ops.push_back({"bilinear_sample", false, [=](std::uint64_t s) {
                       return check32({uniform(Shape{1, 2, 16, 16}, s, 0, 1), uniform(field, s + 1, -0.97, 0.97)},
                                      [s](auto&, const auto& v) {
                                          return testing::weighted_sum(bilinear_sample(v[0], v[1]), s + 2);
                                      });
                   }});
    ops.push_back({"exp_velocity", false, [=](std::uint64_t s) {
                       return check32({testing::smooth_velocity_px(16, 16, s, 1.3 + 0.1 * (s % 7), 2.0)},
                                      [s](auto&, const auto& v) { return testing::weighted_sum(exp_velocity(v[0]), s + 1); });
                   }});
    ops.push_back({"compose", false, [=](std::uint64_t s) {
                       return check32({testing::perturbed_grid(16, 16, s, 1.3), testing::perturbed_grid(16, 16, s + 1, 1.3)},
                                      [s](auto&, const auto& v) { return testing::weighted_sum(compose(v[0], v[1]), s + 2); });
                   }});
    ops.push_back({"smooth_velocity", false, [=](std::uint64_t s) {
                       return check32({uniform(field, s, -0.2, 0.2)}, [s](auto&, const auto& v) {
                           return testing::weighted_sum(smooth_velocity(v[0], 1.0), s + 1);
                       });
                   }});
    ops.push_back({"ssim", false, [=](std::uint64_t s) {
                       return check32({uniform(img, s, 0, 1), uniform(img, s + 1, 0, 1)},
                                      [](auto&, const auto& v) { return ssim(v[0], v[1]); });
                   }});
    ops.push_back({"soft_mutual_information", false, [=](std::uint64_t s) {
                       return check32({uniform(img, s, 0, 1), uniform(img, s + 1, 0, 1)},
                                      [](auto&, const auto& v) { return soft_mutual_information(v[0], v[1]); });
                   }});
    ops.push_back({"mse", true, [=](std::uint64_t s) {
                       return check32({uniform(img, s, 0, 1), uniform(img, s + 1, 0, 1)},
                                      [](auto&, const auto& v) { return mse(v[0], v[1]); });
                   }});
    ops.push_back({"total_loss", false, [=](std::uint64_t s) {
                       // two levels (16x16, 8x8), default objective; fields are the unknowns
                       std::vector<Tensor<double>> in;
                       for (int k = 0; k < 4; ++k) {
                           const int n = k % 2 == 0 ? 16 : 8;
                           in.push_back(uniform(Shape{1, 1, n, n}, s + k, 0.05, 0.95));
                       }
                       for (int k = 0; k < 4; ++k) {
                           const int n = k % 2 == 0 ? 16 : 8;
                           // peaks stay off whole pixels: a sample exactly on a pixel centre is a kink
                           in.push_back(testing::perturbed_grid(n, n, s + 10 + k, 0.65 + 0.1 * k, 1.5));
                       }
                       const std::vector<bool> which = {false, false, false, false, true, true, true, true};
                       return check32(
                           in,
                           [](auto& tape, const auto& v) {
                               using T = std::decay_t<decltype(v[0].value().data[0])>;
                               LossConfig cfg;
                               cfg.ssim_window = 7;  // the 8x8 level cannot hold an 11-pixel window
                               MultiresFields<T> f;
                               f.forward = {v[4], v[5]};
                               f.backward = {v[6], v[7]};
                               const std::vector<Var<T>> grids = {tape.constant(coord_grid<T>(16, 16)),
                                                                  tape.constant(coord_grid<T>(8, 8))};
                               return total_loss<T>({v[0], v[1]}, {v[2], v[3]}, f, grids, cfg);
                           },
                           which);
                   }});
    return ops;
}

Criterion gradient_criterion()
{
    constexpr int kInstances = 10;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream detail;
    for (const auto& op : gradient_ops()) {
        const double tol = op.elementwise ? 1e-3 : 2e-2;
        double worst = 0.0;
        for (int i = 0; i < kInstances; ++i) {
            const auto r = op.run(1000 + 17 * i);
            worst = std::max(worst, r.rel_error);
            ok = ok && r.numeric_norm > 0.0 && r.rel_error <= tol;
        }
        std::cout << "  gradient " << std::left << std::setw(24) << op.name << " worst rel error " << fmt(worst, 3)
                  << " (tol " << tol << ")\n";
        detail << op.name << " " << fmt(worst, 2) << "; ";
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 60.0;
    detail << kInstances << " instances/op, " << fmt(secs, 3) << " s";
    return {"gradient correctness", ok, detail.str()};
}

// --- scaling and squaring vs Euler -------------------------------------------

Criterion euler_criterion()
{
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const double amp = 0.5 + 1.5 * s / 9.0;  // 0.5 .. 2 px
        const Tensor<double> v = testing::smooth_velocity_px(kSize, kSize, 500 + s, amp, 6.0);
        const Tensor<float> fast = exp_velocity(v.cast<float>());
        const Tensor<double> slow = testing::euler_flow(v, 200);
        worst = std::max(worst, mean_endpoint_error_px(fast.cast<double>(), slow));
    }
    return {"scaling-and-squaring oracle", worst <= 0.05, "worst mean EPE vs 200-step Euler " + fmt(worst, 3) + " px (10 fields, <= 2 px)"};
}

// --- registration suite -------------------------------------------------------

struct PairRun {
    double dice_pool = 0.0;
    double dice_wall = 0.0;
    double epe = 0.0;
    double ic = -1.0;
    std::size_t folds = 0;
    double seconds = 0.0;

    double mean_dice() const { return 0.5 * (dice_pool + dice_wall); }
};

PairRun run_pair(const SyntheticPair& pair, const RegistrationConfig& cfg)
{
    const RegistrationResult r = register_images(pair.moving, pair.fixed, cfg);
    PairRun out;
    const Mask2D warped = warp_mask(pair.moving_mask, r.forward);
    out.dice_pool = dice(warped, pair.fixed_mask, kPoolLabel);
    out.dice_wall = dice(warped, pair.fixed_mask, kWallLabel);
    out.epe = mean_endpoint_error_px(r.forward, pair.gt_forward);
    out.folds = count_nonpositive_jacobian(r.forward);
    if (cfg.bidirectional) {
        out.folds += count_nonpositive_jacobian(r.backward);
        out.ic = mean_endpoint_error_px(compose(r.backward, r.forward), coord_grid<float>(kSize, kSize), kInteriorMargin);
    }
    out.seconds = r.seconds;
    return out;
}

double mean_of(const std::vector<PairRun>& runs, double (PairRun::*f)() const)
{
    double s = 0.0;
    for (const auto& r : runs) {
        s += (r.*f)();
    }
    return s / runs.size();
}

}  // namespace

int main(int argc, char** argv)
{
    tune_allocator();
    int pairs = 10;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--pairs") == 0) {
            pairs = std::max(1, std::atoi(argv[i + 1]));
        }
    }
    std::cout << std::fixed;
    std::cout.unsetf(std::ios::floatfield);
    std::vector<Criterion> results;
    std::size_t registration_folds = 0;
    int registrations = 0;

    results.push_back(gradient_criterion());
    results.push_back(euler_criterion());

    // exp_velocity on large smooth fields
    {
        std::size_t folds = 0;
        double largest = 0.0;
        const double sigmas[] = {6.0, 8.0, 10.0};
        for (int s = 0; s < 100; ++s) {
            const double amp = 20.0 * (s + 1) / 100.0;
            const Tensor<double> v = testing::smooth_velocity_px(kSize, kSize, 2000 + s, amp, sigmas[s % 3]);
            largest = std::max(largest, max_component_px(v));
            folds += count_nonpositive_jacobian(exp_velocity(v.cast<float>()));
        }
        std::cout << "  exp_velocity: 100 fields up to " << fmt(largest, 3) << " px, " << folds
                  << " non-positive Jacobian pixels\n";
        results.push_back({"diffeomorphism (exp_velocity fields)", folds == 0,
                           std::to_string(folds) + " folded pixels over 100 fields, max |v| " + fmt(largest, 3) + " px"});
    }

    // synthetic suite
    std::vector<SyntheticPair> suite;
    for (int s = 0; s < pairs; ++s) {
        suite.push_back(make_seeded_pair(static_cast<std::uint64_t>(s), kSize, kAmplitudePx, kSigmaPx));
    }
    auto run_suite = [&](const std::string& label, const RegistrationConfig& cfg) {
        std::vector<PairRun> runs;
        for (int s = 0; s < pairs; ++s) {
            runs.push_back(run_pair(suite[s], cfg));
            const PairRun& r = runs.back();
            registration_folds += r.folds;
            ++registrations;
            std::cout << "  " << label << " pair " << s << ": dice " << fmt(r.dice_pool) << "/" << fmt(r.dice_wall)
                      << " EPE " << fmt(r.epe, 3) << " px";
            if (r.ic >= 0.0) {
                std::cout << " IC " << fmt(r.ic, 3) << " px";
            }
            std::cout << " folds " << r.folds << " time " << fmt(r.seconds, 3) << " s" << std::endl;
        }
        return runs;
    };

    const RegistrationConfig defaults;
    const std::vector<PairRun> bi = run_suite("K=2 bidirectional", defaults);

    {
        bool ok = true;
        double worst_dice = 1.0, worst_epe = 0.0, slowest = 0.0;
        for (const auto& r : bi) {
            worst_dice = std::min({worst_dice, r.dice_pool, r.dice_wall});
            worst_epe = std::max(worst_epe, r.epe);
            slowest = std::max(slowest, r.seconds);
            ok = ok && r.dice_pool >= 0.95 && r.dice_wall >= 0.95 && r.epe <= 1.0 && r.seconds <= 300.0;
        }
        results.push_back({"registration recovery", ok,
                           "min dice " + fmt(worst_dice) + ", max EPE " + fmt(worst_epe, 3) + " px, slowest pair " +
                               fmt(slowest, 3) + " s over " + std::to_string(pairs) + " pairs"});
    }
    {
        double worst = 0.0, sum = 0.0;
        for (const auto& r : bi) {
            worst = std::max(worst, r.ic);
            sum += r.ic;
        }
        results.push_back({"inverse consistency", worst < 0.5,
                           "max interior mean |D^B(D^F(x)) - x| " + fmt(worst, 3) + " px (mean " +
                               fmt(sum / bi.size(), 3) + ", margin " + std::to_string(kInteriorMargin) + " px)"});
    }

    RegistrationConfig uni_cfg;
    uni_cfg.bidirectional = false;
    const std::vector<PairRun> uni = run_suite("K=2 forward-only", uni_cfg);
    {
        const double b = mean_of(bi, &PairRun::mean_dice), u = mean_of(uni, &PairRun::mean_dice);
        results.push_back({"bidirectional >= unidirectional", b >= u,
                           "mean dice " + fmt(b, 5) + " (bidirectional) vs " + fmt(u, 5) + " (forward-only)"});
    }

    RegistrationConfig k1;
    k1.levels = 1;
    RegistrationConfig k3;
    k3.levels = 3;
    const std::vector<PairRun> r1 = run_suite("K=1", k1);
    const std::vector<PairRun> r3 = run_suite("K=3", k3);
    {
        std::cout << "\n  resolution ablation (" << pairs << " pairs)\n"
                  << "  K | mean dice | pool   | wall   | mean EPE px | mean s\n";
        auto row = [&](int k, const std::vector<PairRun>& runs) {
            double pool = 0, wall = 0, epe = 0, secs = 0;
            for (const auto& r : runs) {
                pool += r.dice_pool;
                wall += r.dice_wall;
                epe += r.epe;
                secs += r.seconds;
            }
            const double n = static_cast<double>(runs.size());
            std::printf("  %d | %.4f    | %.4f | %.4f | %.3f       | %.1f\n", k, mean_of(runs, &PairRun::mean_dice),
                        pool / n, wall / n, epe / n, secs / n);
            std::fflush(stdout);
        };
        row(1, r1);
        row(2, bi);
        row(3, r3);
        std::cout << "\n";
        const double d1 = mean_of(r1, &PairRun::mean_dice), d2 = mean_of(bi, &PairRun::mean_dice);
        results.push_back({"resolution ablation (K=2 >= K=1 - 0.02)", d2 >= d1 - 0.02,
                           "mean dice K=1 " + fmt(d1, 5) + ", K=2 " + fmt(d2, 5) + ", K=3 " +
                               fmt(mean_of(r3, &PairRun::mean_dice), 5)});
    }

    // identity
    {
        const Image2D img = suite.front().fixed;
        const RegistrationResult r = register_images(img, img, defaults);
        registration_folds += count_nonpositive_jacobian(r.forward) + count_nonpositive_jacobian(r.backward);
        ++registrations;
        const double disp = mean_displacement_px(r.forward);
        // smoothed loss: means of consecutive 50-iteration blocks after iteration 50
        constexpr int kBlock = 50;
        std::vector<double> blocks;
        for (std::size_t start = 50; start + kBlock <= r.loss_trace.size(); start += kBlock) {
            double s = 0.0;
            for (int k = 0; k < kBlock; ++k) {
                s += r.loss_trace[start + k];
            }
            blocks.push_back(s / kBlock);
        }
        int increases = 0;
        for (std::size_t b = 1; b < blocks.size(); ++b) {
            increases += blocks[b] > blocks[b - 1];
        }
        std::cout << "  identity: mean displacement fwd " << fmt(disp, 3) << " px, bwd "
                  << fmt(mean_displacement_px(r.backward), 3) << " px, loss " << fmt(r.loss_trace.front(), 6) << " -> "
                  << fmt(r.loss_trace.back(), 6) << ", block-mean increases " << increases << "\n";
        results.push_back({"identity sanity", disp < 0.1 && increases == 0,
                           "mean displacement " + fmt(disp, 3) + " px, " + std::to_string(increases) +
                               " increases of the 50-iteration block-mean loss after iteration 50"});
    }

    results.push_back({"diffeomorphism (registrations)", registration_folds == 0,
                       std::to_string(registration_folds) + " non-positive Jacobian pixels over " +
                           std::to_string(registrations) + " registrations"});

    {
        bool ok = true;
        std::string failed;
        int n = 0;
        for (const auto& ex : testing::metric_examples()) {
            ++n;
            if (!ex.pass) {
                ok = false;
                failed += ex.name + " (" + ex.detail + "); ";
            }
        }
        results.push_back({"metric unit examples", ok, ok ? std::to_string(n) + " examples exact" : failed});
    }

    // determinism through the command-line entry point
    {
        const fs::path dir = testing::scratch_dir("acceptance_determinism");
        std::ostringstream sink;
        bool ok = cli::run({"synth", "--out", (dir / "data").string()}, sink, sink) == 0;
        const std::string moving = (dir / "data" / "pair_000" / "moving.pgm").string();
        const std::string fixed = (dir / "data" / "pair_000" / "fixed.pgm").string();
        for (const char* run : {"a", "b"}) {
            ok = ok && cli::run({"register", "--moving", moving, "--fixed", fixed, "--out", (dir / run).string()}, sink,
                                sink) == 0;
        }
        std::string detail = "register exited non-zero";
        if (ok) {
            auto load = [&](const char* run) {
                std::ifstream in(dir / run / "manifest.json");
                nlohmann::json j = nlohmann::json::parse(in);
                j.erase("wall_clock_seconds");
                return j;
            };
            auto bytes = [&](const char* run, const char* file) {
                std::ifstream in(dir / run / file, std::ios::binary);
                return std::string(std::istreambuf_iterator<char>(in), {});
            };
            const bool same_manifest = load("a") == load("b");
            bool same_files = true;
            for (const char* f : {"disp_fwd.dfld", "disp_bwd.dfld", "warped_fwd.pgm", "warped_bwd.pgm", "flow_fwd.png"}) {
                same_files = same_files && bytes("a", f) == bytes("b", f);
            }
            ok = same_manifest && same_files;
            detail = std::string("manifests ") + (same_manifest ? "identical" : "differ") +
                     " (wall_clock_seconds excluded), output files " + (same_files ? "identical" : "differ");
        }
        results.push_back({"determinism", ok, detail});
    }

    std::cout << "\nacceptance summary\n";
    int failures = 0;
    for (const auto& c : results) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << c.detail << "\n";
        failures += !c.pass;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
