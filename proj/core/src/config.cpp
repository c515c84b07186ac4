#include "ntklab/config.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ntklab {

namespace {

ExperimentConfig image_preset(std::string name, EncodingSpec encoding, std::string description) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.description = std::move(description);
    c.encoding = std::move(encoding);
    return c;
}

ExperimentConfig imagenet_preset(std::string name, EncodingSpec encoding, double lr, int batch,
                                 std::string description) {
    ExperimentConfig c = image_preset(std::move(name), std::move(encoding), std::move(description));
    c.learning_rate = lr;
    c.epochs = 100;
    c.batch_size = batch;
    return c;
}

ExperimentConfig mesh_preset(std::string name, EncodingSpec encoding, double lr, int batch,
                             std::string description) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.description = std::move(description);
    c.task = Task::Surface;
    c.encoding = std::move(encoding);
    c.hidden.assign(8, 256);
    c.learning_rate = lr;
    c.epochs = 4000;
    c.batch_size = batch;
    c.render_size = 256;
    return c;
}

ExperimentConfig desk_mesh_preset(std::string name, EncodingSpec encoding, double lr,
                                  std::string description) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.description = std::move(description);
    c.task = Task::Surface;
    c.encoding = std::move(encoding);
    c.hidden.assign(4, 128);
    c.learning_rate = lr;
    c.epochs = 4000;
    c.epoch_scale = 0.05;
    c.batch_size = 10000;
    c.render_size = 96;
    return c;
}

MpeSpec mpe(int dim, int slots, std::vector<int> resolutions) {
    MpeSpec s;
    s.input_dim = dim;
    s.slots = slots;
    s.resolutions = std::move(resolutions);
    return s;
}

std::vector<ExperimentConfig> make_presets() {
    std::vector<ExperimentConfig> p;
    p.push_back(image_preset("baseline", IdentitySpec{2}, "image scaling run, raw coordinates"));
    p.push_back(image_preset("low-ffe", FfeSpec{4, 2}, "image scaling run, Fourier L=4"));
    p.push_back(image_preset("mid-ffe", FfeSpec{8, 2}, "image scaling run, Fourier L=8"));
    p.push_back(image_preset("high-ffe", FfeSpec{16, 2}, "image scaling run, Fourier L=16"));
    p.push_back(image_preset("coarse-mpe", mpe(2, 2, {100}), "image scaling run, grid k=2 x=100"));
    p.push_back(image_preset("fine-mpe", mpe(2, 2, {200}), "image scaling run, grid k=2 x=200"));

    // Same encodings at a learning rate that stays finite for every encoding,
    // with the epoch count scaled for a desk run.
    const std::size_t scaling_rows = p.size();
    for (std::size_t i = 0; i < scaling_rows; ++i) {
        ExperimentConfig d = p[i];
        d.name = "desk-" + d.name;
        d.description = "desk " + d.description;
        d.learning_rate = 30.0;
        d.epoch_scale = 0.3;
        p.push_back(std::move(d));
    }

    p.push_back(imagenet_preset("imagenet-mpe", mpe(2, 3, {96, 277}), 0.3932, 10,
                                "tuned image sweep, grid k=3 L=2 x=96..277"));
    p.push_back(imagenet_preset("imagenet-ffe", FfeSpec{6, 2}, 0.3865, 92,
                                "tuned image sweep, Fourier L=6"));
    p.push_back(imagenet_preset("imagenet-baseline", IdentitySpec{2}, 0.2394, 10,
                                "tuned image sweep, raw coordinates"));

    for (const char* mesh : {"armadillo", "buddha", "dragon"}) {
        const std::string m = mesh;
        p.push_back(mesh_preset(m + "-base", IdentitySpec{3}, 0.92224, 13187,
                                m + " occupancy, raw coordinates"));
        p.push_back(mesh_preset(m + "-ffe", FfeSpec{7, 3}, 0.78930, 9799,
                                m + " occupancy, Fourier L=7"));
    }
    p.push_back(mesh_preset("armadillo-mpe", mpe(3, 1, {44}), 0.99469, 10903,
                            "armadillo occupancy, grid k=1 x=44"));
    p.push_back(mesh_preset("buddha-mpe", mpe(3, 2, {38, 102}), 0.78445, 9267,
                            "buddha occupancy, grid k=2 L=2 x=38..102"));
    p.push_back(mesh_preset("dragon-mpe", mpe(3, 2, {33, 136}), 0.80905, 9989,
                            "dragon occupancy, grid k=2 L=2 x=33..136"));

    p.push_back(desk_mesh_preset("desk3d-base", IdentitySpec{3}, 50.0,
                                 "bundled mesh occupancy, raw coordinates"));
    p.push_back(desk_mesh_preset("desk3d-ffe", FfeSpec{7, 3}, 50.0,
                                 "bundled mesh occupancy, Fourier L=7"));
    p.push_back(desk_mesh_preset("desk3d-mpe", mpe(3, 2, {16, 48}), 50.0,
                                 "bundled mesh occupancy, grid k=2 L=2 x=16..48"));
    return p;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
    }
    return value;
}

double parse_double(const std::string& text, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw ConfigError("config: '" + key + "' expects a finite number, got '" + text + "'");
    }
    return v;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<int>(item, key));
    }
    return out;
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + text + "'");
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

// Encoding keys are collected first so their order in the file does not matter.
struct EncodingFields {
    std::string kind;
    int frequencies = -1;
    int slots = -1;
    std::vector<int> resolutions;
    bool touched = false;
};

EncodingFields fields_of(const EncodingSpec& spec) {
    EncodingFields f;
    if (const auto* s = std::get_if<FfeSpec>(&spec)) {
        f.kind = "ffe";
        f.frequencies = s->frequencies;
    } else if (const auto* m = std::get_if<MpeSpec>(&spec)) {
        f.kind = "mpe";
        f.slots = m->slots;
        f.resolutions = m->resolutions;
    } else {
        f.kind = "identity";
    }
    return f;
}

int task_dim(Task task) { return task == Task::Image ? 2 : 3; }

EncodingSpec build_encoding(const EncodingFields& f, Task task) {
    const int dim = task_dim(task);
    if (f.kind == "identity") return IdentitySpec{dim};
    if (f.kind == "ffe") {
        FfeSpec s{f.frequencies < 0 ? 1 : f.frequencies, dim};
        return s;
    }
    if (f.kind == "mpe") {
        return mpe(dim, f.slots < 0 ? 1 : f.slots, f.resolutions);
    }
    throw ConfigError("config: unknown encoding '" + f.kind + "' (identity, ffe, mpe)");
}

}  // namespace

int ExperimentConfig::effective_epochs() const {
    return static_cast<int>(std::lround(epochs * epoch_scale));
}

std::vector<int> ExperimentConfig::snapshot_schedule() const {
    const int e = effective_epochs();
    std::vector<int> s = snapshot_epochs.empty() ? std::vector<int>{0, e / 2, e} : snapshot_epochs;
    for (int& v : s) v = std::clamp(v, 0, e);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

MlpConfig ExperimentConfig::mlp() const {
    MlpConfig m;
    m.hidden = hidden;
    m.output_dim = output_dim();
    m.beta = beta;
    return m;
}

void validate(const ExperimentConfig& c) {
    if (encoding_input_dim(c.encoding) != task_dim(c.task)) {
        throw ConfigError("config '" + c.name + "': encoding dimension does not match the task");
    }
    if (const auto* f = std::get_if<FfeSpec>(&c.encoding)) validate(*f);
    if (const auto* m = std::get_if<MpeSpec>(&c.encoding)) validate(*m);
    MlpConfig m = c.mlp();
    m.input_dim = encoding_output_dim(c.encoding);
    validate(m);
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
        throw ConfigError("config '" + c.name + "': learning_rate must be positive");
    }
    if (c.epochs < 0 || !(c.epoch_scale >= 0.0)) {
        throw ConfigError("config '" + c.name + "': epochs and epoch_scale must be non-negative");
    }
    if (c.batch_size < 1) throw ConfigError("config '" + c.name + "': batch_size must be >= 1");
    if (c.gram_cap < 1) throw ConfigError("config '" + c.name + "': gram_cap must be >= 1");
    if (c.samples_per_epoch < 0 || c.probe_points < 1 || c.render_size < 1) {
        throw ConfigError("config '" + c.name + "': surface sampling sizes must be positive");
    }
}

const std::vector<ExperimentConfig>& builtin_presets() {
    static const std::vector<ExperimentConfig> presets = make_presets();
    return presets;
}

const ExperimentConfig& find_preset(const std::string& name) {
    for (const auto& p : builtin_presets()) {
        if (p.name == name) return p;
    }
    std::string known;
    for (const auto& p : builtin_presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw ConfigError("unknown preset '" + name + "'; known presets: " + known);
}

void apply_config(std::istream& in, ExperimentConfig& config) {
    EncodingFields enc = fields_of(config.encoding);
    Task task = config.task;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));

        if (key == "name") config.name = value;
        else if (key == "description") config.description = value;
        else if (key == "task") {
            if (value == "image") task = Task::Image;
            else if (value == "surface") task = Task::Surface;
            else throw ConfigError("config: task must be image or surface");
        }
        else if (key == "encoding") { enc.kind = value; enc.touched = true; }
        else if (key == "frequencies") { enc.frequencies = parse_number<int>(value, key); enc.touched = true; }
        else if (key == "slots") { enc.slots = parse_number<int>(value, key); enc.touched = true; }
        else if (key == "resolutions") { enc.resolutions = parse_int_list(value, key); enc.touched = true; }
        else if (key == "hidden") config.hidden = parse_int_list(value, key);
        else if (key == "beta") config.beta = parse_double(value, key);
        else if (key == "learning_rate") config.learning_rate = parse_double(value, key);
        else if (key == "epochs") config.epochs = parse_number<int>(value, key);
        else if (key == "epoch_scale") config.epoch_scale = parse_double(value, key);
        else if (key == "batch_size") config.batch_size = parse_number<int>(value, key);
        else if (key == "seed") config.seed = parse_number<std::uint64_t>(value, key);
        else if (key == "snapshot_epochs") config.snapshot_epochs = parse_int_list(value, key);
        else if (key == "gram_cap") config.gram_cap = parse_number<std::size_t>(value, key);
        else if (key == "snapshot_mlp_only") config.snapshot_mlp_only = parse_bool(value, key);
        else if (key == "samples_per_epoch") config.samples_per_epoch = parse_number<int>(value, key);
        else if (key == "probe_points") config.probe_points = parse_number<int>(value, key);
        else if (key == "render_size") config.render_size = parse_number<int>(value, key);
        else {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (enc.touched || task != config.task) config.encoding = build_encoding(enc, task);
    config.task = task;
}

void apply_config_file(const std::string& path, ExperimentConfig& config) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    apply_config(in, config);
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << std::setprecision(17);
    const EncodingFields enc = fields_of(c.encoding);
    out << "name = " << c.name << '\n';
    if (!c.description.empty()) out << "description = " << c.description << '\n';
    out << "task = " << to_string(c.task) << '\n';
    out << "encoding = " << enc.kind << '\n';
    if (enc.kind == "ffe") out << "frequencies = " << enc.frequencies << '\n';
    if (enc.kind == "mpe") {
        out << "slots = " << enc.slots << '\n';
        out << "resolutions = " << join(enc.resolutions) << '\n';
    }
    out << "hidden = " << join(c.hidden) << '\n';
    out << "beta = " << c.beta << '\n';
    out << "learning_rate = " << c.learning_rate << '\n';
    out << "epochs = " << c.epochs << '\n';
    out << "epoch_scale = " << c.epoch_scale << '\n';
    out << "batch_size = " << c.batch_size << '\n';
    out << "seed = " << c.seed << '\n';
    out << "snapshot_epochs = " << join(c.snapshot_epochs) << '\n';
    out << "gram_cap = " << c.gram_cap << '\n';
    out << "snapshot_mlp_only = " << (c.snapshot_mlp_only ? "true" : "false") << '\n';
    out << "samples_per_epoch = " << c.samples_per_epoch << '\n';
    out << "probe_points = " << c.probe_points << '\n';
    out << "render_size = " << c.render_size << '\n';
    return out.str();
}

std::string to_string(Task task) { return task == Task::Image ? "image" : "surface"; }

}  // namespace ntklab
