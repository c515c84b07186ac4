#include "commands.hpp"

#include "ntklab/diagnostics.hpp"
#include "ntklab/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ntklab;

namespace {

void add_run_flags(CLI::App* cmd, cli::RunOptions& o) {
    cmd->add_option("--preset", o.preset, "Built-in preset (see `ntklab presets`)");
    cmd->add_option("--config", o.config_file, "key = value file applied on top of the preset")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory")->required();
    cmd->add_option("--seed", o.seed, "Override the seed");
    cmd->add_option("--epochs", o.epochs, "Run exactly this many epochs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--gram-cap", o.gram_cap, "Largest Gram matrix order")->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural tangent kernel experiments for coordinate networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ntklab 0.1.0");

    cli::RunOptions run;
    std::string input;
    int samples = 16;
    int steps = 10000;
    int resolution = kDefaultRegionResolution;
    std::string show;

    auto* regress = app.add_subcommand("regress2d", "Fit an image and record kernel spectra");
    regress->add_option("image", input, "PNG or PPM image")->required();
    add_run_flags(regress, run);

    auto* ablate = app.add_subcommand("ablate-grid", "Spectra with and without the grid term");
    ablate->add_option("image", input, "PNG or PPM image")->required();
    add_run_flags(ablate, run);

    auto* dyn = app.add_subcommand("dynamics", "Linearized training against the spectral predictor");
    dyn->add_option("image", input, "PNG or PPM image")->required();
    dyn->add_option("-n,--samples", samples, "Training pixels")->capture_default_str();
    dyn->add_option("--steps", steps, "Gradient steps to simulate")->capture_default_str();
    add_run_flags(dyn, run);

    auto* surface = app.add_subcommand("surface3d", "Fit an occupancy field to a mesh and render it");
    surface->add_option("mesh", input, "Wavefront OBJ mesh")->required();
    add_run_flags(surface, run);

    std::string out_dir;
    auto* diag = app.add_subcommand("diagnostics", "Grid images and activation regions of a checkpoint");
    diag->add_option("checkpoint", input, "model.ckpt written by regress2d")->required();
    diag->add_option("--out", out_dir, "Output directory")->required();
    diag->add_option("--resolution", resolution, "Region lattice size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* presets = app.add_subcommand("presets", "List built-in presets");
    presets->add_option("--show", show, "Print one preset as a config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kUsageError;
    }

    try {
        if (*regress) return cli::cmd_regress2d(input, run);
        if (*ablate) return cli::cmd_ablate_grid(input, run);
        if (*dyn) return cli::cmd_dynamics(input, run, samples, steps);
        if (*surface) return cli::cmd_surface3d(input, run);
        if (*diag) return cli::cmd_diagnostics(input, out_dir, resolution);
        if (*presets) return cli::cmd_presets(show);
    } catch (const cli::UsageError& e) {
        std::cerr << "ntklab: " << e.what() << '\n';
        return cli::kUsageError;
    } catch (const ConfigError& e) {
        std::cerr << "ntklab: " << e.what() << '\n';
        return cli::kUsageError;
    } catch (const IoError& e) {
        std::cerr << "ntklab: " << e.what() << '\n';
        return cli::kUsageError;
    } catch (const CapacityError& e) {
        std::cerr << "ntklab: " << e.what() << '\n';
        return cli::kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "ntklab: " << e.what() << '\n';
        return cli::kRuntimeFailure;
    }
    return cli::kUsageError;
}
