#include "ntklab/surface3d.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace ntklab {

namespace {

constexpr double kHitSlack = 1e-10;
constexpr double kNudge = 1e-7;
constexpr int kRetries = 3;
constexpr int kBisectionSteps = 8;

int parse_index(const std::string& token, std::size_t vertex_count, const std::string& where) {
    const std::string head = token.substr(0, token.find('/'));
    int idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stoi(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        throw IoError(where + ": bad face index '" + token + "'");
    }
    const long resolved = idx < 0 ? static_cast<long>(vertex_count) + idx : idx - 1L;
    if (idx == 0 || resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
        throw IoError(where + ": face index " + std::to_string(idx) + " out of range");
    }
    return static_cast<int>(resolved);
}

bool check_watertight(const std::vector<std::array<int, 3>>& triangles) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : triangles) {
        for (int e = 0; e < 3; ++e) {
            const int a = t[static_cast<std::size_t>(e)];
            const int b = t[static_cast<std::size_t>((e + 1) % 3)];
            ++edges[{std::min(a, b), std::max(a, b)}];
        }
    }
    return std::all_of(edges.begin(), edges.end(), [](const auto& kv) { return kv.second == 2; });
}

}  // namespace

TriangleMesh make_mesh(std::vector<Point3> vertices, std::vector<std::array<int, 3>> triangles) {
    if (vertices.empty() || triangles.empty()) throw IoError("mesh has no vertices or faces");
    for (const auto& t : triangles) {
        for (int i : t) {
            if (i < 0 || i >= static_cast<int>(vertices.size())) {
                throw IoError("mesh: triangle index out of range");
            }
        }
    }
    Point3 lo = vertices.front();
    Point3 hi = vertices.front();
    for (const auto& v : vertices) {
        if (!v.allFinite()) throw IoError("mesh: non-finite vertex");
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double longest = (hi - lo).maxCoeff();
    if (!(longest > 0.0)) throw IoError("mesh: degenerate bounding box");

    TriangleMesh mesh;
    mesh.offset = lo;
    mesh.scale = 1.0 / longest;
    for (auto& v : vertices) v = (v - lo) * mesh.scale;
    mesh.vertices = std::move(vertices);
    mesh.triangles = std::move(triangles);
    mesh.lower = Point3::Zero();
    mesh.upper = (hi - lo) * mesh.scale;
    mesh.watertight = check_watertight(mesh.triangles);
    return mesh;
}

TriangleMesh parse_obj(std::istream& in, const std::string& name) {
    std::vector<Point3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = name + ":" + std::to_string(line_no);
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Point3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) throw IoError(where + ": malformed vertex");
            vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string token;
            while (ls >> token) poly.push_back(parse_index(token, vertices.size(), where));
            if (poly.size() < 3) throw IoError(where + ": face with fewer than 3 vertices");
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                triangles.push_back({poly[0], poly[i], poly[i + 1]});
            }
        }
    }
    if (vertices.empty() || triangles.empty()) throw IoError(name + ": no vertices or faces");
    TriangleMesh mesh = make_mesh(std::move(vertices), std::move(triangles));
    if (!mesh.watertight) {
        std::cerr << "warning: " << name
                  << " is not watertight; inside/outside labels are best effort\n";
    }
    return mesh;
}

TriangleMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh '" + path + "'");
    return parse_obj(in, path);
}

InsideTester::InsideTester(const TriangleMesh& mesh) : mesh_(&mesh) {
    const int bins = std::clamp(static_cast<int>(std::sqrt(mesh.triangles.size())), 1, 64);
    for (int axis = 0; axis < 3; ++axis) {
        AxisIndex& idx = indices_[static_cast<std::size_t>(axis)];
        idx.axis = axis;
        idx.u_axis = (axis + 1) % 3;
        idx.v_axis = (axis + 2) % 3;
        idx.bins = bins;
        const double pad = 1e-6;
        idx.u0 = mesh.lower[idx.u_axis] - pad;
        idx.v0 = mesh.lower[idx.v_axis] - pad;
        idx.du = (mesh.upper[idx.u_axis] - mesh.lower[idx.u_axis] + 2 * pad) / bins;
        idx.dv = (mesh.upper[idx.v_axis] - mesh.lower[idx.v_axis] + 2 * pad) / bins;
        if (!(idx.du > 0.0)) idx.du = 1.0;
        if (!(idx.dv > 0.0)) idx.dv = 1.0;
        idx.cells.assign(static_cast<std::size_t>(bins * bins), {});
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
            for (int c : mesh.triangles[t]) {
                const Point3& p = mesh.vertices[static_cast<std::size_t>(c)];
                umin = std::min(umin, p[idx.u_axis]);
                umax = std::max(umax, p[idx.u_axis]);
                vmin = std::min(vmin, p[idx.v_axis]);
                vmax = std::max(vmax, p[idx.v_axis]);
            }
            auto cell = [&](double x, double x0, double dx) {
                return std::clamp(static_cast<int>(std::floor((x - x0) / dx)), 0, bins - 1);
            };
            for (int i = cell(umin, idx.u0, idx.du); i <= cell(umax, idx.u0, idx.du); ++i) {
                for (int j = cell(vmin, idx.v0, idx.dv); j <= cell(vmax, idx.v0, idx.dv); ++j) {
                    idx.cells[static_cast<std::size_t>(i * bins + j)].push_back(static_cast<int>(t));
                }
            }
        }
    }
}

// Möller–Trumbore against the +axis ray from `origin`.
int InsideTester::crossings(const AxisIndex& idx, const Point3& origin, bool& degenerate) const {
    degenerate = false;
    const int i = static_cast<int>(std::floor((origin[idx.u_axis] - idx.u0) / idx.du));
    const int j = static_cast<int>(std::floor((origin[idx.v_axis] - idx.v0) / idx.dv));
    if (i < 0 || j < 0 || i >= idx.bins || j >= idx.bins) return 0;
    Point3 dir = Point3::Zero();
    dir[idx.axis] = 1.0;
    int count = 0;
    for (int t : idx.cells[static_cast<std::size_t>(i * idx.bins + j)]) {
        const auto& tri = mesh_->triangles[static_cast<std::size_t>(t)];
        const Point3& a = mesh_->vertices[static_cast<std::size_t>(tri[0])];
        const Point3 e1 = mesh_->vertices[static_cast<std::size_t>(tri[1])] - a;
        const Point3 e2 = mesh_->vertices[static_cast<std::size_t>(tri[2])] - a;
        const Point3 p = dir.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-14) continue;
        const double inv = 1.0 / det;
        const Point3 s = origin - a;
        const double u = s.dot(p) * inv;
        if (u < -kHitSlack || u > 1.0 + kHitSlack) continue;
        const Point3 q = s.cross(e1);
        const double v = dir.dot(q) * inv;
        if (v < -kHitSlack || u + v > 1.0 + kHitSlack) continue;
        const double dist = e2.dot(q) * inv;
        if (dist < -kHitSlack) continue;
        if (u < kHitSlack || v < kHitSlack || u + v > 1.0 - kHitSlack || dist < kHitSlack) {
            degenerate = true;
            return 0;
        }
        ++count;
    }
    return count;
}

bool InsideTester::inside(const Point3& p) const {
    static const Point3 nudge_dir = Point3(0.5377, 0.8326, 0.1322).normalized();
    int votes = 0;
    for (const auto& idx : indices_) {
        Point3 origin = p;
        bool degenerate = false;
        int hits = crossings(idx, origin, degenerate);
        for (int retry = 1; degenerate && retry <= kRetries; ++retry) {
            origin = p + (kNudge * retry) * nudge_dir;
            hits = crossings(idx, origin, degenerate);
        }
        votes += hits % 2;
    }
    return votes >= 2;
}

OccupancyBatch occupancy_batch(const InsideTester& tester, const TriangleMesh& mesh,
                               std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    OccupancyBatch batch;
    batch.points.resize(static_cast<Eigen::Index>(n), 3);
    batch.labels.resize(static_cast<Eigen::Index>(n), 1);
    const Point3 extent = mesh.upper - mesh.lower;
    for (std::size_t i = 0; i < n; ++i) {
        Point3 p;
        for (int a = 0; a < 3; ++a) p[a] = mesh.lower[a] + unit(rng) * extent[a];
        const auto r = static_cast<Eigen::Index>(i);
        batch.points.row(r) = p.transpose();
        batch.labels(r, 0) = tester.inside(p) ? 1.0 : 0.0;
    }
    return batch;
}

std::vector<OccupancySample> occupancy_sample(const TriangleMesh& mesh, std::size_t n,
                                              std::uint64_t seed) {
    if (n < 1) throw DomainError("occupancy_sample: n must be >= 1");
    const InsideTester tester(mesh);
    const OccupancyBatch batch = occupancy_batch(tester, mesh, n, seed);
    std::vector<OccupancySample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out[i] = {batch.points.row(r).transpose(), static_cast<int>(batch.labels(r, 0))};
    }
    return out;
}

double occupancy_loss(const CoordinateModel& model, const OccupancyBatch& batch) {
    return evaluate_loss(forward_batch(model, batch.points).transpose(), batch.labels.transpose(),
                         Loss::BinaryCrossEntropy);
}

SurfaceResult train_occupancy(const ExperimentConfig& config, const TriangleMesh& mesh,
                              const SurfaceEpochCallback& on_epoch) {
    validate(config);
    if (config.task != Task::Surface) throw ConfigError("train_occupancy: preset is not a surface task");
    SurfaceResult result;
    result.config = config;
    result.model = init_model(config.encoding, config.mlp(), config.seed);
    const InsideTester tester(mesh);
    result.probe = occupancy_batch(tester, mesh, static_cast<std::size_t>(config.probe_points),
                                   kProbeSeed)
                       .points;
    if (static_cast<std::size_t>(result.probe.rows()) > config.gram_cap) {
        std::vector<std::size_t> keep =
            stratified_subsample(static_cast<std::size_t>(result.probe.rows()), config.gram_cap);
        Matrix sub(static_cast<Eigen::Index>(keep.size()), 3);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            sub.row(static_cast<Eigen::Index>(i)) = result.probe.row(static_cast<Eigen::Index>(keep[i]));
        }
        result.probe = sub;
    }

    const int epochs = config.effective_epochs();
    const std::vector<int> schedule = config.snapshot_schedule();
    NtkOptions options;
    options.cap = config.gram_cap;
    auto snapshot = [&](int epoch) {
        if (!std::binary_search(schedule.begin(), schedule.end(), epoch)) return;
        const SnapshotTag tag = epoch == 0 ? SnapshotTag::Start
                                : epoch >= epochs ? SnapshotTag::End
                                                  : SnapshotTag::Mid;
        auto record = [&](bool include_grid) {
            const NtkGram gram = empirical_ntk(result.model, result.probe, include_grid, options);
            result.spectra.push_back({tag, epoch, gram.component, sym_eig(gram.k).eigenvalues});
        };
        record(true);
        if (result.model.grids() && config.snapshot_mlp_only) record(false);
    };

    snapshot(0);
    const std::size_t per_epoch = static_cast<std::size_t>(
        config.samples_per_epoch > 0 ? config.samples_per_epoch : config.batch_size);
    const auto batch = static_cast<Eigen::Index>(config.batch_size);
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const OccupancyBatch data =
            occupancy_batch(tester, mesh, per_epoch, config.seed * 1000003ULL + epoch);
        double loss_sum = 0.0;
        int batches = 0;
        for (Eigen::Index start = 0; start < data.points.rows(); start += batch) {
            const Eigen::Index len = std::min(batch, data.points.rows() - start);
            loss_sum += train_step(result.model, data.points.middleRows(start, len),
                                   data.labels.middleRows(start, len), config.learning_rate,
                                   Loss::BinaryCrossEntropy);
            ++batches;
        }
        result.loss.push_back(loss_sum / batches);
        if (on_epoch) on_epoch(epoch, result.loss.back());
        snapshot(epoch);
    }
    return result;
}

Camera orbit_camera(double distance, double elevation_degrees, double azimuth_degrees,
                    double fov_degrees) {
    const double el = elevation_degrees * M_PI / 180.0;
    const double az = azimuth_degrees * M_PI / 180.0;
    Camera cam;
    cam.target = Point3(0.5, 0.5, 0.5);
    cam.eye = cam.target + distance * Point3(std::cos(el) * std::cos(az),
                                             std::cos(el) * std::sin(az), std::sin(el));
    cam.up = Point3(0.0, 0.0, 1.0);
    cam.fov_degrees = fov_degrees;
    return cam;
}

Point3 camera_ray(const Camera& camera, int width, int height, double px, double py) {
    const Point3 forward = (camera.target - camera.eye).normalized();
    Point3 right = forward.cross(camera.up);
    if (right.norm() < 1e-12) right = forward.unitOrthogonal();
    right.normalize();
    const Point3 up = right.cross(forward);
    const double half = std::tan(camera.fov_degrees * M_PI / 360.0);
    const double aspect = static_cast<double>(width) / height;
    const double sx = (2.0 * (px + 0.5) / width - 1.0) * half * aspect;
    const double sy = (1.0 - 2.0 * (py + 0.5) / height) * half;
    return (forward + sx * right + sy * up).normalized();
}

LogitField model_field(const CoordinateModel& model) {
    return [&model](const Matrix& points) -> Vector { return forward_batch(model, points).col(0); };
}

std::size_t DepthImage::foreground_count() const {
    return static_cast<std::size_t>(
        std::count_if(depth.begin(), depth.end(), [](double d) { return std::isfinite(d); }));
}

DepthImage raymarch_depth(const LogitField& field, const Camera& camera, int width, int height,
                          double step) {
    if (width < 1 || height < 1) throw DimensionError("raymarch_depth: empty resolution");
    if (!(step > 0.0)) throw DomainError("raymarch_depth: step must be positive");
    DepthImage out;
    out.width = width;
    out.height = height;
    out.depth.assign(static_cast<std::size_t>(width) * height, kBackgroundDepth);

    struct Ray {
        std::size_t pixel;
        Point3 dir;
        double t;
        double t_start;
        double t_end;
    };
    std::vector<Ray> active;
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            const Point3 d = camera_ray(camera, width, height, px, py);
            // Slab intersection with the unit box.
            double t0 = 0.0;
            double t1 = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a) {
                if (std::abs(d[a]) < 1e-15) {
                    if (camera.eye[a] < 0.0 || camera.eye[a] > 1.0) t1 = -1.0;
                    continue;
                }
                double ta = (0.0 - camera.eye[a]) / d[a];
                double tb = (1.0 - camera.eye[a]) / d[a];
                if (ta > tb) std::swap(ta, tb);
                t0 = std::max(t0, ta);
                t1 = std::min(t1, tb);
            }
            if (t0 <= t1) {
                active.push_back({static_cast<std::size_t>(py) * width + px, d, t0, t0, t1});
            }
        }
    }

    struct Hit {
        std::size_t pixel;
        Point3 dir;
        double lo;
        double hi;
    };
    std::vector<Hit> hits;
    while (!active.empty()) {
        Matrix pts(static_cast<Eigen::Index>(active.size()), 3);
        for (std::size_t i = 0; i < active.size(); ++i) {
            pts.row(static_cast<Eigen::Index>(i)) =
                (camera.eye + active[i].t * active[i].dir).cwiseMax(0.0).cwiseMin(1.0).transpose();
        }
        const Vector logits = field(pts);
        std::vector<Ray> next;
        next.reserve(active.size());
        for (std::size_t i = 0; i < active.size(); ++i) {
            Ray r = active[i];
            if (logits[static_cast<Eigen::Index>(i)] >= 0.0) {
                hits.push_back({r.pixel, r.dir, std::max(r.t - step, r.t_start), r.t});
                continue;
            }
            if (r.t >= r.t_end) continue;
            r.t = std::min(r.t + step, r.t_end);
            next.push_back(r);
        }
        active.swap(next);
    }

    // Bisection on [lo, hi]: lo outside (or the entry point), hi inside.
    for (int it = 0; it < kBisectionSteps && !hits.empty(); ++it) {
        Matrix pts(static_cast<Eigen::Index>(hits.size()), 3);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const double mid = 0.5 * (hits[i].lo + hits[i].hi);
            pts.row(static_cast<Eigen::Index>(i)) =
                (camera.eye + mid * hits[i].dir).cwiseMax(0.0).cwiseMin(1.0).transpose();
        }
        const Vector logits = field(pts);
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const double mid = 0.5 * (hits[i].lo + hits[i].hi);
            if (logits[static_cast<Eigen::Index>(i)] >= 0.0) {
                hits[i].hi = mid;
            } else {
                hits[i].lo = mid;
            }
        }
    }
    for (const auto& h : hits) out.depth[h.pixel] = h.hi;
    return out;
}

DepthImage raymarch_depth(const CoordinateModel& model, const Camera& camera, int width,
                          int height, double step) {
    if (model.input_dim() != 3) throw DimensionError("raymarch_depth: model must take 3D input");
    return raymarch_depth(model_field(model), camera, width, height, step);
}

Image depth_to_image(const DepthImage& depth) {
    Image img(depth.width, depth.height, 1, 0.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double d : depth.depth) {
        if (std::isfinite(d)) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < depth.depth.size(); ++i) {
        const double d = depth.depth[i];
        if (std::isfinite(d)) img.data[i] = 1.0 - 0.8 * (d - lo) / range;
    }
    return img;
}

void write_depth_csv(std::ostream& out, const DepthImage& depth) {
    out << "px,py,depth\n" << std::setprecision(17);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            out << x << ',' << y << ',';
            const double d = depth.at(x, y);
            if (std::isfinite(d)) {
                out << d;
            } else {
                out << "inf";
            }
            out << '\n';
        }
    }
}

}  // namespace ntklab
