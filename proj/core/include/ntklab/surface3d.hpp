#pragma once

#include "ntklab/config.hpp"
#include "ntklab/image.hpp"
#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace ntklab {

using Point3 = Eigen::Vector3d;

/// Triangle mesh scaled so the bounding box starts at the origin and its
/// longest axis spans exactly [0, 1]. `original = normalized / scale + offset`.
struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<std::array<int, 3>> triangles;
    Point3 offset = Point3::Zero();
    double scale = 1.0;
    /// Every edge shared by exactly two triangles.
    bool watertight = true;
    /// Normalized bounding box.
    Point3 lower = Point3::Zero();
    Point3 upper = Point3::Ones();
};

/// Parses `v` and `f` records (polygons fan-triangulated, `v/vt/vn` and
/// negative indices accepted, everything else ignored) and normalizes.
/// Non-watertight meshes load with `watertight = false`. Throws IoError.
TriangleMesh parse_obj(std::istream& in, const std::string& name = "<stream>");
TriangleMesh load_mesh(const std::string& path);

/// Builds a normalized mesh from raw geometry.
TriangleMesh make_mesh(std::vector<Point3> vertices, std::vector<std::array<int, 3>> triangles);

/// Ray-parity inside test with a per-axis bin index for the candidate search.
class InsideTester {
public:
    /// Keeps a reference to `mesh`, which must outlive the tester.
    explicit InsideTester(const TriangleMesh& mesh);

    /// Majority over three ray directions of the crossing parity. A ray that
    /// grazes an edge, vertex or starts on a face is re-cast from an origin
    /// nudged by 1e-7 (up to 3 retries).
    [[nodiscard]] bool inside(const Point3& p) const;

private:
    struct AxisIndex {
        int axis;
        int u_axis;
        int v_axis;
        int bins;
        double u0, v0, du, dv;
        std::vector<std::vector<int>> cells;
    };

    [[nodiscard]] int crossings(const AxisIndex& index, const Point3& origin, bool& degenerate) const;

    const TriangleMesh* mesh_;
    std::array<AxisIndex, 3> indices_;
};

struct OccupancySample {
    Point3 point;
    int label = 0;
};

/// `n` points uniform in the mesh's normalized bounding box, labelled 1 iff
/// inside.
std::vector<OccupancySample> occupancy_sample(const TriangleMesh& mesh, std::size_t n,
                                              std::uint64_t seed);

/// Same as occupancy_sample but as an N × 3 point matrix and N × 1 labels.
struct OccupancyBatch {
    Matrix points;
    Matrix labels;
};
OccupancyBatch occupancy_batch(const InsideTester& tester, const TriangleMesh& mesh,
                               std::size_t n, std::uint64_t seed);

struct SurfaceResult {
    ExperimentConfig config;
    /// Mean batch BCE per epoch, 1..E.
    std::vector<double> loss;
    std::vector<SpectrumRecord> spectra;
    Matrix probe;
    CoordinateModel model;
};

using SurfaceEpochCallback = std::function<void(int, double)>;

/// Fixed seed of the spectrum probe set, shared by every encoding.
inline constexpr std::uint64_t kProbeSeed = 0x5EEDULL;

/// Trains an occupancy network with sigmoid + BCE on fresh samples each
/// epoch; spectra are taken on a fixed probe set of `config.probe_points`.
SurfaceResult train_occupancy(const ExperimentConfig& config, const TriangleMesh& mesh,
                              const SurfaceEpochCallback& on_epoch = {});

/// Mean BCE of `model` on `batch`.
double occupancy_loss(const CoordinateModel& model, const OccupancyBatch& batch);

/// Pinhole camera looking at `target`.
struct Camera {
    Point3 eye{0.0, 0.0, 2.0};
    Point3 target{0.5, 0.5, 0.5};
    Point3 up{0.0, 0.0, 1.0};
    double fov_degrees = 40.0;
};

/// Camera on a sphere of radius `distance` around (0.5, 0.5, 0.5), z up.
/// Defaults: distance 2.2, elevation 30°, azimuth 45°, vertical fov 40°.
Camera orbit_camera(double distance = 2.2, double elevation_degrees = 30.0,
                    double azimuth_degrees = 45.0, double fov_degrees = 40.0);

/// Unit direction through the center of pixel (px, py); row 0 is the top.
Point3 camera_ray(const Camera& camera, int width, int height, double px, double py);

/// Logits for rows of an N × 3 point matrix.
using LogitField = std::function<Vector(const Matrix&)>;
LogitField model_field(const CoordinateModel& model);

inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

/// Distance from the eye per pixel, row-major; background pixels hold
/// kBackgroundDepth.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<double> depth;

    [[nodiscard]] double at(int x, int y) const {
        return depth[static_cast<std::size_t>(y) * width + x];
    }
    [[nodiscard]] std::size_t foreground_count() const;
};

/// Default march step: 1/256 of the unit box diagonal.
inline double default_march_step() { return std::sqrt(3.0) / 256.0; }

/// Marches every pixel ray through the unit box in steps of `step`; the
/// first sample with logit ≥ 0 is refined by 8 bisection steps.
DepthImage raymarch_depth(const LogitField& field, const Camera& camera, int width, int height,
                          double step = default_march_step());
DepthImage raymarch_depth(const CoordinateModel& model, const Camera& camera, int width,
                          int height, double step = default_march_step());

/// Grayscale render, near = bright, background black.
Image depth_to_image(const DepthImage& depth);
void write_depth_csv(std::ostream& out, const DepthImage& depth);

}  // namespace ntklab
