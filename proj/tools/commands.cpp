#include "commands.hpp"

#include "ntklab/checkpoint.hpp"
#include "ntklab/diagnostics.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/regress2d.hpp"
#include "ntklab/surface3d.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace ntklab::cli {

namespace {

constexpr std::uint64_t kHeldOutSeed = 909;
constexpr std::size_t kHeldOutPoints = 20000;

fs::path prepare_out(const std::string& dir) {
    if (dir.empty()) throw UsageError("--out is required");
    fs::create_directories(dir);
    return fs::path(dir);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << std::setprecision(17);
    return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

std::string spectrum_file(const SpectrumRecord& s) {
    std::string name = "spectrum_" + to_string(s.tag);
    if (s.component == KernelComponent::MlpOnly) name += "_mlp_only";
    return name + ".csv";
}

void write_spectra(const fs::path& dir, const std::vector<SpectrumRecord>& spectra) {
    for (const auto& s : spectra) {
        auto out = open_out(dir / spectrum_file(s));
        write_spectrum_csv(out, s.eigenvalues);
    }
}

// Progress line roughly every tenth of the run.
auto epoch_logger(int total, bool quiet) {
    const int every = std::max(1, total / 10);
    return [=](int epoch, double loss, double metric) {
        if (quiet || (epoch % every != 0 && epoch != total)) return;
        std::cerr << "epoch " << epoch << "/" << total << "  loss " << loss;
        if (metric >= 0.0) std::cerr << "  psnr " << std::fixed << std::setprecision(2) << metric << std::defaultfloat;
        std::cerr << '\n';
    };
}

const GridStack& require_grid(const CoordinateModel& model) {
    const GridStack* g = model.grids();
    if (!g) throw UsageError("model has no grid encoding");
    return *g;
}

}  // namespace

ExperimentConfig resolve_config(const RunOptions& o) {
    if (o.preset.empty() && o.config_file.empty()) throw UsageError("give --preset, --config or both");
    ExperimentConfig c = o.preset.empty() ? ExperimentConfig{} : find_preset(o.preset);
    if (!o.config_file.empty()) apply_config_file(o.config_file, c);
    if (o.seed) c.seed = *o.seed;
    if (o.epochs) {
        c.epochs = *o.epochs;
        c.epoch_scale = 1.0;
    }
    if (o.gram_cap) c.gram_cap = *o.gram_cap;
    validate(c);
    return c;
}

int cmd_regress2d(const std::string& image_path, const RunOptions& options) {
    const ExperimentConfig config = resolve_config(options);
    if (config.task != Task::Image) throw UsageError("preset '" + config.name + "' is not an image preset");
    const RegressionDataset data = load_image_dataset(image_path);
    const fs::path dir = prepare_out(options.out_dir);

    const auto log = epoch_logger(config.effective_epochs(), options.quiet);
    const ExperimentResult r = run_experiment(config, data, log);

    write_png((dir / "prediction.png").string(), r.prediction);
    write_png((dir / "target.png").string(), dataset_image(data));
    {
        auto out = open_out(dir / "history.csv");
        out << "epoch,loss,psnr\n";
        for (std::size_t e = 0; e < r.loss.size(); ++e) out << e + 1 << ',' << r.loss[e] << ',' << r.psnr[e] << '\n';
    }
    write_spectra(dir, r.spectra);
    write_text(dir / "config.cfg", format_config(config));
    save_checkpoint((dir / "model.ckpt").string(), config, r.model);
    {
        auto out = open_out(dir / "summary.txt");
        out << "preset = " << config.name << "\nencoding = " << encoding_name(config.encoding)
            << "\nepochs = " << config.effective_epochs() << "\npsnr = " << r.final_psnr
            << "\nms_ssim = " << r.final_ms_ssim << "\ngram_samples = " << r.gram_samples.size() << '\n';
        if (!r.spectra.empty()) {
            out << "min_eigenvalue_end = " << clamped_eigenvalues(r.spectra.back().eigenvalues).minCoeff() << '\n';
        }
    }
    std::cout << config.name << ": psnr " << std::fixed << std::setprecision(2) << r.final_psnr << " dB, ms-ssim "
              << std::setprecision(4) << r.final_ms_ssim << '\n';
    return kOk;
}

int cmd_ablate_grid(const std::string& image_path, const RunOptions& options) {
    ExperimentConfig config = resolve_config(options);
    if (config.task != Task::Image || !std::holds_alternative<MpeSpec>(config.encoding)) {
        throw UsageError("ablate-grid needs an image preset with a grid encoding (got '" + config.name + "')");
    }
    const RegressionDataset data = load_image_dataset(image_path);
    const fs::path dir = prepare_out(options.out_dir);
    const int e = config.effective_epochs();
    config.snapshot_mlp_only = true;
    config.snapshot_epochs = {e / 2, e};

    ExperimentConfig reference = config;
    reference.name = config.name + "-reference";
    reference.encoding = IdentitySpec{2};
    reference.snapshot_mlp_only = false;

    if (!options.quiet) std::cerr << "grid run (" << config.name << ")\n";
    const ExperimentResult grid = run_experiment(config, data, epoch_logger(e, options.quiet));
    if (!options.quiet) std::cerr << "reference run (raw coordinates)\n";
    const ExperimentResult base = run_experiment(reference, data, epoch_logger(e, options.quiet));

    auto find = [](const std::vector<SpectrumRecord>& v, int epoch, KernelComponent c) -> const Vector& {
        for (const auto& s : v) {
            if (s.epoch == epoch && s.component == c) return s.eigenvalues;
        }
        throw NumericError("ablate-grid: missing spectrum snapshot");
    };
    auto summary = open_out(dir / "summary.txt");
    summary << "preset = " << config.name << '\n';
    for (int epoch : config.snapshot_schedule()) {
        const Vector full = clamped_eigenvalues(find(grid.spectra, epoch, KernelComponent::Full));
        const Vector no_grid = clamped_eigenvalues(find(grid.spectra, epoch, KernelComponent::MlpOnly));
        const Vector ref = clamped_eigenvalues(find(base.spectra, epoch, KernelComponent::Full));
        const std::string tag = to_string(tag_for_epoch(epoch, e));
        auto out = open_out(dir / ("ablation_" + tag + ".csv"));
        out << "index,full,mlp_only,baseline\n";
        for (Eigen::Index i = 0; i < full.size(); ++i) {
            out << i << ',' << full[i] << ',' << no_grid[i] << ',' << ref[i] << '\n';
        }
        const double gap = (no_grid.array().log10() - ref.array().log10()).abs().maxCoeff();
        summary << tag << "_epoch = " << epoch << '\n'
                << tag << "_min_full = " << full.minCoeff() << '\n'
                << tag << "_min_mlp_only = " << no_grid.minCoeff() << '\n'
                << tag << "_min_baseline = " << ref.minCoeff() << '\n'
                << tag << "_lift_ratio = " << full.minCoeff() / no_grid.minCoeff() << '\n'
                << tag << "_max_decade_gap = " << gap << '\n';
        std::cout << tag << ": min eigenvalue full " << full.minCoeff() << ", without grid " << no_grid.minCoeff()
                  << ", baseline " << ref.minCoeff() << '\n';
    }
    return kOk;
}

int cmd_dynamics(const std::string& image_path, const RunOptions& options, int samples, int steps) {
    const ExperimentConfig config = resolve_config(options);
    if (config.task != Task::Image) throw UsageError("dynamics needs an image preset");
    if (samples < 1 || static_cast<std::size_t>(samples) > config.gram_cap) {
        throw UsageError("-n must be between 1 and the Gram cap (" + std::to_string(config.gram_cap) + ")");
    }
    if (steps < 1) throw UsageError("--steps must be positive");
    const RegressionDataset data = load_image_dataset(image_path);
    const fs::path dir = prepare_out(options.out_dir);

    const auto train_ids = stratified_pixel_subsample(data.width, data.height, static_cast<std::size_t>(samples));
    // Held-out pixels: the training lattice shifted by (3, 2).
    std::vector<std::size_t> test_ids;
    for (auto id : train_ids) test_ids.push_back((id + 2 * static_cast<std::size_t>(data.width) + 3) % data.x.rows());
    std::vector<std::size_t> all_ids = train_ids;
    all_ids.insert(all_ids.end(), test_ids.begin(), test_ids.end());

    const CoordinateModel model = init_model(config.encoding, config.mlp(), config.seed);
    const Matrix xtr = gather_rows(data.x, train_ids);
    const Matrix xall = gather_rows(data.x, all_ids);
    const NtkGram ktr = empirical_ntk(model, xtr, true, {0, config.gram_cap, NtkMethod::Factored});
    const Matrix kall = cross_ntk(model, xall, xtr, true);
    const Vector f0_tr = forward_batch(model, xtr).col(0);
    const Vector y = gather_rows(data.y, train_ids).col(0) - f0_tr;

    // Linearized gradient descent on ½‖f − y‖², step 1e-2/λ_max.
    const double lr = 1e-2 / sym_eig(ktr.k).eigenvalues[0];
    const int every = std::max(1, steps / 100);
    std::vector<double> times;
    std::vector<Vector> actual;
    Vector f_tr = Vector::Zero(y.size());
    Vector f_all = Vector::Zero(static_cast<Eigen::Index>(all_ids.size()));
    for (int s = 0; s <= steps; ++s) {
        if (s % every == 0 || s == steps) {
            times.push_back(lr * s);
            actual.push_back(f_all);
        }
        const Vector r = f_tr - y;
        f_all -= lr * (kall * r);
        f_tr -= lr * (ktr.k * r);
    }
    const DynamicsPrediction pred = predict_dynamics(ktr, kall, y, times);

    std::vector<DynamicsRow> rows;
    double worst = 0.0;
    for (std::size_t t = 0; t < times.size(); ++t) {
        for (std::size_t i = 0; i < all_ids.size(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            rows.push_back({times[t], all_ids[i], pred.predictions[t][ii], actual[t][ii]});
            worst = std::max(worst, std::abs(pred.predictions[t][ii] - actual[t][ii]));
        }
    }
    {
        auto out = open_out(dir / "dynamics.csv");
        write_dynamics_csv(out, rows);
    }
    {
        auto out = open_out(dir / "residual_decay.csv");
        out << "t,index,residual\n";
        const auto decay = residual_decay(ktr, y, times);
        for (std::size_t t = 0; t < times.size(); ++t) {
            for (Eigen::Index i = 0; i < decay[t].size(); ++i) out << times[t] << ',' << i << ',' << decay[t][i] << '\n';
        }
    }
    {
        auto out = open_out(dir / "summary.txt");
        out << "preset = " << config.name << "\ntrain_samples = " << samples << "\nheld_out_samples = " << test_ids.size()
            << "\nsteps = " << steps << "\nlearning_rate = " << lr << "\nridge = " << pred.ridge
            << "\nmax_abs_error = " << worst << '\n';
    }
    std::cout << "max |predicted - actual| = " << worst << " over " << steps << " steps\n";
    return kOk;
}

int cmd_surface3d(const std::string& mesh_path, const RunOptions& options) {
    const ExperimentConfig config = resolve_config(options);
    if (config.task != Task::Surface) throw UsageError("preset '" + config.name + "' is not a surface preset");
    const TriangleMesh mesh = load_mesh(mesh_path);
    const fs::path dir = prepare_out(options.out_dir);

    const int total = config.effective_epochs();
    const auto log = epoch_logger(total, options.quiet);
    const SurfaceResult r = train_occupancy(config, mesh, [&](int e, double loss) { log(e, loss, -1.0); });

    {
        auto out = open_out(dir / "loss.csv");
        out << "epoch,bce\n";
        for (std::size_t e = 0; e < r.loss.size(); ++e) out << e + 1 << ',' << r.loss[e] << '\n';
    }
    write_spectra(dir, r.spectra);
    const DepthImage depth = raymarch_depth(r.model, orbit_camera(), config.render_size, config.render_size);
    write_png((dir / "depth.png").string(), depth_to_image(depth));
    {
        auto out = open_out(dir / "depth.csv");
        write_depth_csv(out, depth);
    }
    const InsideTester tester(mesh);
    const double bce = occupancy_loss(r.model, occupancy_batch(tester, mesh, kHeldOutPoints, kHeldOutSeed));
    write_text(dir / "config.cfg", format_config(config));
    save_checkpoint((dir / "model.ckpt").string(), config, r.model);
    {
        auto out = open_out(dir / "summary.txt");
        out << "preset = " << config.name << "\nencoding = " << encoding_name(config.encoding)
            << "\nepochs = " << total << "\nheld_out_bce = " << bce
            << "\nforeground_pixels = " << depth.foreground_count() << '\n';
        if (!r.spectra.empty()) {
            const Vector ev = clamped_eigenvalues(r.spectra.back().eigenvalues);
            out << "min_eigenvalue_end = " << ev.minCoeff() << "\nmean_log10_eigenvalue_end = "
                << ev.array().log10().mean() << '\n';
        }
    }
    std::cout << config.name << ": held-out bce " << bce << ", " << depth.foreground_count()
              << " foreground pixels\n";
    return kOk;
}

int cmd_diagnostics(const std::string& checkpoint_path, const std::string& out_dir, int resolution) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const fs::path dir = prepare_out(out_dir);
    if (ck.model.input_dim() != 2) throw UsageError("diagnostics needs a 2D (image) checkpoint");

    if (ck.model.grids()) {
        const GridStack& g = require_grid(ck.model);
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
            for (int s = 0; s < g.slots; ++s) {
                write_png((dir / ("grid_l" + std::to_string(l) + "_s" + std::to_string(s) + ".png")).string(),
                          grid_to_image(g, l, s));
            }
        }
        write_grid_csv((dir / "grid.csv").string(), g);
    }
    const RegionCount regions = count_regions(ck.model, resolution);
    write_png((dir / "regions.png").string(), region_image(regions));
    {
        auto out = open_out(dir / "summary.txt");
        out << "preset = " << ck.config.name << "\nencoding = " << encoding_name(ck.config.encoding)
            << "\nregion_resolution = " << resolution << "\nregion_count = " << regions.count << '\n';
    }
    std::cout << ck.config.name << ": " << regions.count << " activation regions on a " << resolution << "x"
              << resolution << " lattice\n";
    return kOk;
}

int cmd_presets(const std::string& show) {
    if (!show.empty()) {
        std::cout << format_config(find_preset(show));
        return kOk;
    }
    std::cout << std::left << std::setw(20) << "name" << std::setw(9) << "task" << std::setw(24) << "encoding"
              << std::setw(11) << "lr" << std::setw(8) << "epochs" << "batch\n";
    for (const auto& p : builtin_presets()) {
        std::ostringstream lr;
        lr << p.learning_rate;
        std::cout << std::setw(20) << p.name << std::setw(9) << to_string(p.task) << std::setw(24)
                  << encoding_name(p.encoding) << std::setw(11) << lr.str() << std::setw(8) << p.effective_epochs()
                  << p.batch_size << '\n';
    }
    return kOk;
}

}  // namespace ntklab::cli
