#include "nsm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsm {

void Aabb::extend(const Vec3& p)
{
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
}

void Aabb::extend(const Aabb& b)
{
    if (b.empty()) return;
    extend(b.lo);
    extend(b.hi);
}

bool Aabb::contains(const Aabb& b, double tol) const
{
    return (b.lo.array() >= lo.array() - tol).all() && (b.hi.array() <= hi.array() + tol).all();
}

std::array<Vec3, 8> Aabb::corners() const
{
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i)
        c[i] = Vec3((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    return c;
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::array<Vec3, 4> plane_corners(const Plane& p)
{
    const Vec3 u = p.tangent.normalized() * p.half_u;
    const Vec3 v = p.normal.normalized().cross(p.tangent.normalized()) * p.half_v;
    return {p.center - u - v, p.center + u - v, p.center + u + v, p.center - u + v};
}

bool finite(const Vec3& v) { return v.allFinite(); }

// Moller-Trumbore, two-sided.
bool ray_triangle(const Ray& r, const Vec3& a, const Vec3& b, const Vec3& c, double& t)
{
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pv = r.dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = r.origin - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = r.dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    t = e2.dot(qv) * inv;
    return true;
}

// Nearest hit of one primitive with t in (t_min, t_max).
std::optional<Hit> intersect_primitive(const Primitive& prim, const Ray& r, double t_min, double t_max)
{
    return std::visit(
        Overloaded{
            [&](const Plane& p) -> std::optional<Hit> {
                const Vec3 n = p.normal.normalized();
                const double denom = n.dot(r.dir);
                if (std::abs(denom) < 1e-14) return std::nullopt;
                const double t = n.dot(p.center - r.origin) / denom;
                if (!(t > t_min && t < t_max)) return std::nullopt;
                const Vec3 d = r.at(t) - p.center;
                const Vec3 tu = p.tangent.normalized();
                const Vec3 tv = n.cross(tu);
                if (std::abs(d.dot(tu)) > p.half_u || std::abs(d.dot(tv)) > p.half_v) return std::nullopt;
                return Hit{t, n, -1};
            },
            [&](const Sphere& s) -> std::optional<Hit> {
                const Vec3 oc = r.origin - s.center;
                const double b = oc.dot(r.dir);
                const double c = oc.squaredNorm() - s.radius * s.radius;
                const double disc = b * b - c;
                if (disc < 0.0) return std::nullopt;
                const double sq = std::sqrt(disc);
                // numerically stable roots
                const double q = (b > 0.0) ? -(b + sq) : -(b - sq);
                double t0 = q;
                double t1 = (q != 0.0) ? c / q : -b;
                if (t0 > t1) std::swap(t0, t1);
                double t = t0;
                if (!(t > t_min && t < t_max)) {
                    t = t1;
                    if (!(t > t_min && t < t_max)) return std::nullopt;
                }
                return Hit{t, (r.at(t) - s.center) / s.radius, -1};
            },
            [&](const Box& bx) -> std::optional<Hit> {
                double t0 = t_min, t1 = t_max;
                int axis0 = -1, axis1 = -1;
                for (int a = 0; a < 3; ++a) {
                    const double inv = 1.0 / r.dir[a];
                    double ta = (bx.lo[a] - r.origin[a]) * inv;
                    double tb = (bx.hi[a] - r.origin[a]) * inv;
                    if (ta > tb) std::swap(ta, tb);
                    if (ta > t0) {
                        t0 = ta;
                        axis0 = a;
                    }
                    if (tb < t1) {
                        t1 = tb;
                        axis1 = a;
                    }
                    if (t0 > t1) return std::nullopt;
                }
                double t;
                int axis;
                if (axis0 >= 0 && t0 > t_min) {
                    t = t0;
                    axis = axis0;
                } else if (axis1 >= 0 && t1 < t_max) {
                    t = t1;
                    axis = axis1;
                } else {
                    return std::nullopt;
                }
                Vec3 n = Vec3::Zero();
                const Vec3 p = r.at(t);
                n[axis] = (std::abs(p[axis] - bx.hi[axis]) < std::abs(p[axis] - bx.lo[axis])) ? 1.0 : -1.0;
                return Hit{t, n, -1};
            },
            [&](const TriMesh& m) -> std::optional<Hit> {
                std::optional<Hit> best;
                double t_best = t_max;
                for (const auto& f : m.faces) {
                    const Vec3& a = m.vertices[f[0]];
                    const Vec3& b = m.vertices[f[1]];
                    const Vec3& c = m.vertices[f[2]];
                    double t;
                    if (ray_triangle(r, a, b, c, t) && t > t_min && t < t_best) {
                        t_best = t;
                        best = Hit{t, (b - a).cross(c - a).normalized(), -1};
                    }
                }
                return best;
            },
        },
        prim.shape);
}

} // namespace

Aabb bounds(const Primitive& prim)
{
    Aabb box;
    std::visit(Overloaded{
                   [&](const Plane& p) {
                       for (const auto& c : plane_corners(p)) box.extend(c);
                   },
                   [&](const Sphere& s) {
                       box.extend(s.center - Vec3::Constant(s.radius));
                       box.extend(s.center + Vec3::Constant(s.radius));
                   },
                   [&](const Box& b) {
                       box.extend(b.lo);
                       box.extend(b.hi);
                   },
                   [&](const TriMesh& m) {
                       for (const auto& v : m.vertices) box.extend(v);
                   },
               },
               prim.shape);
    return box;
}

std::pair<Vec3, double> bounding_sphere(const Primitive& prim)
{
    if (const auto* s = std::get_if<Sphere>(&prim.shape)) return {s->center, s->radius};
    const Aabb b = bounds(prim);
    return {b.center(), 0.5 * b.diagonal()};
}

Primitive translated(const Primitive& prim, const Vec3& offset)
{
    Primitive out = prim;
    std::visit(Overloaded{
                   [&](Plane& p) { p.center += offset; },
                   [&](Sphere& s) { s.center += offset; },
                   [&](Box& b) {
                       b.lo += offset;
                       b.hi += offset;
                   },
                   [&](TriMesh& m) {
                       for (auto& v : m.vertices) v += offset;
                   },
               },
               out.shape);
    return out;
}

bool is_finite(const Primitive& prim)
{
    return std::visit(Overloaded{
                          [](const Plane& p) {
                              return finite(p.center) && finite(p.normal) && finite(p.tangent) &&
                                     std::isfinite(p.half_u) && std::isfinite(p.half_v) && p.half_u > 0 &&
                                     p.half_v > 0 && p.normal.norm() > 0 && p.tangent.norm() > 0 &&
                                     std::abs(p.normal.normalized().dot(p.tangent.normalized())) < 1e-6;
                          },
                          [](const Sphere& s) { return finite(s.center) && std::isfinite(s.radius) && s.radius > 0; },
                          [](const Box& b) { return finite(b.lo) && finite(b.hi) && (b.lo.array() < b.hi.array()).all(); },
                          [](const TriMesh& m) {
                              if (m.faces.empty()) return false;
                              for (const auto& v : m.vertices)
                                  if (!finite(v)) return false;
                              for (const auto& f : m.faces)
                                  for (int i : f)
                                      if (i < 0 || i >= static_cast<int>(m.vertices.size())) return false;
                              return true;
                          },
                      },
                      prim.shape);
}

bool is_occluder(const Primitive& prim) { return !std::holds_alternative<Plane>(prim.shape); }

std::vector<Triangle> triangulate(const Primitive& prim)
{
    std::vector<Triangle> tris;
    std::visit(Overloaded{
                   [&](const Plane& p) {
                       const auto c = plane_corners(p);
                       tris.push_back({c[0], c[1], c[2]});
                       tris.push_back({c[0], c[2], c[3]});
                   },
                   [&](const Sphere&) {},
                   [&](const Box& b) {
                       const Vec3 lo = b.lo, hi = b.hi;
                       auto P = [&](int x, int y, int z) {
                           return Vec3(x ? hi.x() : lo.x(), y ? hi.y() : lo.y(), z ? hi.z() : lo.z());
                       };
                       // quads listed counter-clockwise seen from outside
                       const int quads[6][4][3] = {
                           {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}, // +x
                           {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}, // -x
                           {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}, // +y
                           {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}, // -y
                           {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}, // +z
                           {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}, // -z
                       };
                       for (const auto& q : quads) {
                           const Vec3 a = P(q[0][0], q[0][1], q[0][2]);
                           const Vec3 bb = P(q[1][0], q[1][1], q[1][2]);
                           const Vec3 c = P(q[2][0], q[2][1], q[2][2]);
                           const Vec3 d = P(q[3][0], q[3][1], q[3][2]);
                           tris.push_back({a, bb, c});
                           tris.push_back({a, c, d});
                       }
                   },
                   [&](const TriMesh& m) {
                       for (const auto& f : m.faces)
                           tris.push_back({m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]});
                   },
               },
               prim.shape);
    return tris;
}

double emitter_radius(double size_index)
{
    if (!(size_index >= 0.0 && size_index <= kMaxSizeIndex))
        throw std::invalid_argument("size_index must lie in [0, 4]");
    return size_index * (kMaxEmitterDiameter / 2.0) / kMaxSizeIndex;
}

Scene::Scene(std::vector<Primitive> objects, Emitter emitter)
    : objects_(std::move(objects)), emitter_(emitter)
{
    if (objects_.empty()) throw std::invalid_argument("scene needs at least one object");
    for (const auto& p : objects_) {
        if (!is_finite(p)) throw std::invalid_argument("primitive '" + p.name + "' is not finite or is degenerate");
        bounds_.extend(nsm::bounds(p));
    }
    if (!emitter_.center.allFinite()) throw std::invalid_argument("emitter center is not finite");
    (void)emitter_.radius(); // validates size_index
}

Scene Scene::with_emitter(const Emitter& e) const { return Scene(objects_, e); }

Scene Scene::with_object_offset(int index, const Vec3& offset) const
{
    if (index < 0 || index >= static_cast<int>(objects_.size()))
        throw std::out_of_range("object index out of range");
    auto objs = objects_;
    objs[index] = translated(objs[index], offset);
    return Scene(std::move(objs), emitter_);
}

std::optional<Hit> Scene::intersect(const Ray& ray, double t_min, double t_max) const
{
    std::optional<Hit> best;
    double t_best = t_max;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
        if (auto h = intersect_primitive(objects_[i], ray, t_min, t_best)) {
            t_best = h->t;
            h->object = static_cast<int>(i);
            best = h;
        }
    }
    return best;
}

bool Scene::occluded(const Ray& ray, double t_min, double t_max) const
{
    for (const auto& p : objects_)
        if (intersect_primitive(p, ray, t_min, t_max)) return true;
    return false;
}

bool Scene::inside_solid(const Vec3& p) const
{
    for (const auto& prim : objects_) {
        if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
            if ((p - s->center).norm() < s->radius) return true;
        } else if (const auto* b = std::get_if<Box>(&prim.shape)) {
            if ((p.array() > b->lo.array()).all() && (p.array() < b->hi.array()).all()) return true;
        }
    }
    return false;
}

CameraPose CameraPose::orthonormalized() const
{
    CameraPose c = *this;
    const double fn = forward.norm();
    if (!(fn > 0.0)) throw std::invalid_argument("camera forward vector is zero");
    c.forward = forward / fn;
    Vec3 u = up - c.forward * c.forward.dot(up);
    const double un = u.norm();
    if (!(un > 1e-12)) throw std::invalid_argument("camera up vector is parallel to forward");
    c.up = u / un;
    return c;
}

double CameraPose::focal_px() const { return 0.5 * height / std::tan(0.5 * fov_y); }

Vec3 CameraPose::depth_direction(double px, double py) const
{
    const double f = focal_px();
    const double sx = (px - 0.5 * width) / f;
    const double sy = (0.5 * height - py) / f;
    return forward + sx * right() + sy * up;
}

Ray CameraPose::ray_through(double px, double py) const
{
    return Ray{position, depth_direction(px, py).normalized()};
}

std::optional<CameraPose::Projection> CameraPose::project(const Vec3& world) const
{
    const Vec3 v = world - position;
    const double z = v.dot(forward);
    if (!(z > 0.0)) return std::nullopt;
    const double f = focal_px();
    const double x = v.dot(right()) / z * f + 0.5 * width;
    const double y = 0.5 * height - v.dot(up) / z * f;
    return Projection{x, y, z};
}

void validate(const CameraPose& cam)
{
    if (!cam.position.allFinite()) throw std::invalid_argument("camera position is not finite");
    if (!(cam.fov_y > 0.0 && cam.fov_y < M_PI)) throw std::invalid_argument("camera fov must lie in (0, pi)");
    if (cam.height <= 0 || cam.width <= 0) throw std::invalid_argument("camera resolution must be positive");
    if (std::abs(cam.forward.norm() - 1.0) > 1e-9 || std::abs(cam.up.norm() - 1.0) > 1e-9 ||
        std::abs(cam.forward.dot(cam.up)) > 1e-9)
        throw std::invalid_argument("camera basis must be orthonormal");
}

template <class V>
void validate_keys(const std::vector<Keyframe<V>>& keys)
{
    if (keys.empty()) throw std::invalid_argument("trajectory track has no keyframes");
    for (std::size_t i = 1; i < keys.size(); ++i)
        if (!(keys[i].time > keys[i - 1].time))
            throw std::invalid_argument("keyframe times must be strictly increasing");
}

template void validate_keys(const std::vector<Keyframe<CameraPose>>&);
template void validate_keys(const std::vector<Keyframe<Vec3>>&);

namespace {

// Index i and weight s such that value = lerp(keys[i], keys[i+1], s); s == 0
// exactly at keyframe times.
template <class V>
std::pair<std::size_t, double> locate(const std::vector<Keyframe<V>>& keys, double t)
{
    validate_keys(keys);
    if (keys.size() == 1 || t <= keys.front().time) return {0, 0.0};
    if (t >= keys.back().time) return {keys.size() - 1, 0.0};
    const auto it = std::upper_bound(keys.begin(), keys.end(), t,
                                     [](double tv, const Keyframe<V>& k) { return tv < k.time; });
    const std::size_t i = static_cast<std::size_t>(it - keys.begin()) - 1;
    const double s = (t - keys[i].time) / (keys[i + 1].time - keys[i].time);
    return {i, s};
}

} // namespace

Vec3 trajectory_at(const std::vector<Keyframe<Vec3>>& keys, double t)
{
    const auto [i, s] = locate(keys, t);
    if (s == 0.0) return keys[i].value;
    return (1.0 - s) * keys[i].value + s * keys[i + 1].value;
}

CameraPose trajectory_at(const std::vector<Keyframe<CameraPose>>& keys, double t)
{
    const auto [i, s] = locate(keys, t);
    if (s == 0.0) return keys[i].value;
    const CameraPose& a = keys[i].value;
    const CameraPose& b = keys[i + 1].value;
    CameraPose c = a;
    c.position = (1.0 - s) * a.position + s * b.position;
    c.forward = (1.0 - s) * a.forward + s * b.forward;
    c.up = (1.0 - s) * a.up + s * b.up;
    c.fov_y = (1.0 - s) * a.fov_y + s * b.fov_y;
    return c.orthonormalized();
}

void Trajectory::validate() const
{
    validate_keys(camera);
    if (!emitter.empty()) validate_keys(emitter);
    for (const auto& o : objects) validate_keys(o.offsets);
}

std::pair<double, double> Trajectory::time_range() const
{
    double lo = kInf, hi = -kInf;
    auto upd = [&](double t) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    };
    for (const auto& k : camera) upd(k.time);
    for (const auto& k : emitter) upd(k.time);
    for (const auto& o : objects)
        for (const auto& k : o.offsets) upd(k.time);
    if (lo > hi) return {0.0, 0.0};
    return {lo, hi};
}

Scene Trajectory::scene_at(const Scene& base, double t) const
{
    auto objs = base.objects();
    for (const auto& o : objects) {
        if (o.object < 0 || o.object >= static_cast<int>(objs.size()))
            throw std::out_of_range("object track refers to a missing object");
        objs[o.object] = translated(objs[o.object], trajectory_at(o.offsets, t));
    }
    Emitter e = base.emitter();
    if (!emitter.empty()) e.center = trajectory_at(emitter, t);
    return Scene(std::move(objs), e);
}

void PerturbationSpec::validate() const
{
    if (count < 0) throw std::invalid_argument("perturbation count must be >= 0");
    if (!(camera_scale >= 0.0) || !(emitter_scale >= 0.0))
        throw std::invalid_argument("perturbation scales must be >= 0");
}

Vec3 random_unit_vector(std::mt19937_64& rng)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    for (;;) {
        Vec3 v(n01(rng), n01(rng), n01(rng));
        const double len = v.norm();
        if (len > 1e-12) return v / len;
    }
}

std::vector<PerturbedState> sample_perturbation(const Scene& scene, const CameraPose& camera,
                                                const PerturbationSpec& spec, std::mt19937_64& rng)
{
    spec.validate();
    const double d_scene = (camera.position - scene.bounds().center()).norm();
    const double cam_step = spec.camera_scale * d_scene;
    const double emit_step = spec.emitter_scale * std::max(scene.emitter().radius(), kMinPerturbRadius);
    std::vector<PerturbedState> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        const Vec3 u = random_unit_vector(rng);
        const Vec3 v = random_unit_vector(rng);
        PerturbedState s{camera, scene.emitter()};
        s.camera.position += cam_step * u;
        s.emitter.center += emit_step * v;
        out.push_back(s);
    }
    return out;
}

Scene sphere_over_plane(double sphere_height, double emitter_height, double size_index, double ground_half_extent)
{
    std::vector<Primitive> objs;
    objs.push_back({"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), ground_half_extent, ground_half_extent}});
    objs.push_back({"sphere", Sphere{Vec3(0, sphere_height, 0), 0.5}});
    return Scene(std::move(objs), Emitter{Vec3(0, emitter_height, 0), size_index});
}

} // namespace nsm
