#include "ntklab/checkpoint.hpp"

#include "ntklab/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ntklab {

namespace {

constexpr char kMagic[8] = {'N', 'T', 'K', 'L', 'A', 'B', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("checkpoint '" + path + "' is truncated");
    return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const CoordinateModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    const std::string text = format_config(config);
    const Vector params = flatten_parameters(model);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(params.size()));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw IoError("'" + path + "' is not an ntklab checkpoint");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint '" + path + "' has unsupported version " + std::to_string(version));
    }
    const auto text_len = get<std::uint64_t>(in, path);
    if (text_len > (1u << 20)) throw IoError("checkpoint '" + path + "': config block too large");
    std::string text(text_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(text_len));
    if (!in) throw IoError("checkpoint '" + path + "' is truncated");

    Checkpoint ck;
    std::istringstream config_stream(text);
    apply_config(config_stream, ck.config);
    ck.model = init_model(ck.config.encoding, ck.config.mlp(), ck.config.seed);

    const auto count = get<std::uint64_t>(in, path);
    if (count != ck.model.parameter_count()) {
        throw IoError("checkpoint '" + path + "': parameter count " + std::to_string(count) +
                      " does not match its config (" + std::to_string(ck.model.parameter_count()) + ")");
    }
    Vector params(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IoError("checkpoint '" + path + "' is truncated");
    assign_parameters(ck.model, params);
    return ck;
}

}  // namespace ntklab
