#include "nsm/raster.hpp"

#include "nsm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsm {

namespace {

constexpr double kNear = 1e-3;

struct DepthTarget {
    const PinholeView& view;
    std::vector<double> depth;
    std::vector<int> object;
    std::vector<Vec3> normal;

    explicit DepthTarget(const PinholeView& v)
        : view(v), depth(static_cast<std::size_t>(v.height) * v.width, kInf),
          object(depth.size(), -1), normal(depth.size(), Vec3::Zero())
    {
    }

    void write(int x, int y, double d, int id, const Vec3& n)
    {
        const std::size_t i = static_cast<std::size_t>(y) * view.width + x;
        if (d < depth[i]) {
            depth[i] = d;
            object[i] = id;
            normal[i] = n;
        }
    }
};

Vec3 to_view(const PinholeView& v, const Vec3& p)
{
    const Vec3 d = p - v.eye;
    return Vec3(d.dot(v.right), d.dot(v.up), d.dot(v.forward));
}

struct ScreenVertex {
    double x, y, z; // pixel coordinates and axial depth
};

ScreenVertex to_screen(const PinholeView& v, const Vec3& pv)
{
    const double sx = (pv.x() / pv.z()) / v.tan_half_x * (0.5 * v.width) + 0.5 * v.width;
    const double sy = 0.5 * v.height - (pv.y() / pv.z()) / v.tan_half_y * (0.5 * v.height);
    return {sx, sy, pv.z()};
}

struct PixelRect {
    int x0, y0, x1, y1; // inclusive-exclusive
    bool empty() const { return x0 >= x1 || y0 >= y1; }
};

PixelRect clamp_rect(const PinholeView& v, double xmin, double ymin, double xmax, double ymax)
{
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
    r.y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    r.x1 = std::min(v.width, static_cast<int>(std::ceil(xmax + 0.5)) + 1);
    r.y1 = std::min(v.height, static_cast<int>(std::ceil(ymax + 0.5)) + 1);
    return r;
}

void raster_sphere(const Sphere& s, int id, DepthTarget& t)
{
    const PinholeView& v = t.view;
    PixelRect rect{0, 0, v.width, v.height};
    Aabb box;
    box.extend(s.center - Vec3::Constant(s.radius));
    box.extend(s.center + Vec3::Constant(s.radius));
    bool all_front = true;
    double xmin = kInf, ymin = kInf, xmax = -kInf, ymax = -kInf;
    for (const Vec3& c : box.corners()) {
        const Vec3 pv = to_view(v, c);
        if (pv.z() <= kNear) {
            all_front = false;
            break;
        }
        const ScreenVertex sv = to_screen(v, pv);
        xmin = std::min(xmin, sv.x);
        xmax = std::max(xmax, sv.x);
        ymin = std::min(ymin, sv.y);
        ymax = std::max(ymax, sv.y);
    }
    if (all_front) rect = clamp_rect(v, xmin, ymin, xmax, ymax);
    if (rect.empty()) return;

    const Vec3 oc = v.eye - s.center;
    const double c = oc.squaredNorm() - s.radius * s.radius;
    for (int y = rect.y0; y < rect.y1; ++y) {
        for (int x = rect.x0; x < rect.x1; ++x) {
            const Vec3 dir = v.depth_direction(x + 0.5, y + 0.5);
            const double a = dir.squaredNorm();
            const double b = dir.dot(oc);
            const double disc = b * b - a * c;
            if (disc < 0.0) continue;
            const double sq = std::sqrt(disc);
            const double near_root = (-b - sq) / a;
            const double far_root = (-b + sq) / a;
            const double d = near_root > kNear ? near_root : far_root;
            if (!(d > kNear)) continue;
            t.write(x, y, d, id, (v.eye + d * dir - s.center) / s.radius);
        }
    }
}

double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py)
{
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Edge function evaluated with the endpoints in a fixed order, so triangles
// sharing an edge get exactly opposite values and no pixel center falls through.
double shared_edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py)
{
    if (b.x < a.x || (b.x == a.x && b.y < a.y)) return -edge(b, a, px, py);
    return edge(a, b, px, py);
}

void raster_triangle(const Triangle& tri, int id, DepthTarget& t)
{
    const PinholeView& v = t.view;
    const Vec3 n = tri.normal();
    // clip against the near plane
    std::vector<Vec3> poly = {to_view(v, tri.a), to_view(v, tri.b), to_view(v, tri.c)};
    std::vector<Vec3> clipped;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec3& p = poly[i];
        const Vec3& q = poly[(i + 1) % poly.size()];
        const bool pin = p.z() >= kNear;
        const bool qin = q.z() >= kNear;
        if (pin) clipped.push_back(p);
        if (pin != qin) {
            const double s = (kNear - p.z()) / (q.z() - p.z());
            Vec3 r = p + s * (q - p);
            r.z() = kNear;
            clipped.push_back(r);
        }
    }
    if (clipped.size() < 3) return;
    std::vector<ScreenVertex> sv;
    sv.reserve(clipped.size());
    for (const Vec3& p : clipped) sv.push_back(to_screen(v, p));

    for (std::size_t k = 1; k + 1 < sv.size(); ++k) {
        const ScreenVertex& a = sv[0];
        const ScreenVertex& b = sv[k];
        const ScreenVertex& c = sv[k + 1];
        const double area = edge(a, b, c.x, c.y);
        if (std::abs(area) < 1e-12) continue;
        const PixelRect rect = clamp_rect(v, std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y}),
                                          std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y}));
        const double inv_area = 1.0 / area;
        for (int y = rect.y0; y < rect.y1; ++y) {
            const double py = y + 0.5;
            for (int x = rect.x0; x < rect.x1; ++x) {
                const double px = x + 0.5;
                const double l0 = shared_edge(b, c, px, py) * inv_area;
                const double l1 = shared_edge(c, a, px, py) * inv_area;
                const double l2 = shared_edge(a, b, px, py) * inv_area;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
                // perspective-correct: 1/z is affine in screen space
                const double inv_z = l0 / a.z + l1 / b.z + l2 / c.z;
                t.write(x, y, 1.0 / inv_z, id, n);
            }
        }
    }
}

DepthTarget rasterize(const Scene& scene, const PinholeView& view)
{
    DepthTarget t(view);
    for (std::size_t i = 0; i < scene.objects().size(); ++i) {
        const Primitive& prim = scene.objects()[i];
        if (const auto* s = std::get_if<Sphere>(&prim.shape)) {
            raster_sphere(*s, static_cast<int>(i), t);
        } else {
            for (const Triangle& tri : triangulate(prim)) raster_triangle(tri, static_cast<int>(i), t);
        }
    }
    return t;
}

// Emitter frame orientation without frustum fitting.
PinholeView emitter_basis(const Scene& scene, const Vec3& center)
{
    PinholeView v;
    v.eye = center;
    Vec3 f = scene.bounds().center() - center;
    if (!(f.norm() > 1e-12)) throw FrustumError("emitter sits at the scene-bounds center");
    f.normalize();
    const Vec3 ref = std::abs(f.y()) > 0.9 ? Vec3(0, 0, -1) : Vec3(0, 1, 0);
    v.forward = f;
    v.right = f.cross(ref).normalized();
    v.up = v.right.cross(f);
    return v;
}

} // namespace

Vec3 PinholeView::depth_direction(double px, double py) const
{
    const double sx = (px - 0.5 * width) / (0.5 * width) * tan_half_x;
    const double sy = (0.5 * height - py) / (0.5 * height) * tan_half_y;
    return forward + sx * right + sy * up;
}

std::optional<CameraPose::Projection> PinholeView::project(const Vec3& p) const
{
    const Vec3 pv = to_view(*this, p);
    if (!(pv.z() > 0.0)) return std::nullopt;
    const ScreenVertex s = to_screen(*this, pv);
    return CameraPose::Projection{s.x, s.y, s.z};
}

PinholeView camera_view(const CameraPose& cam)
{
    PinholeView v;
    v.eye = cam.position;
    v.forward = cam.forward;
    v.up = cam.up;
    v.right = cam.right();
    v.height = cam.height;
    v.width = cam.width;
    v.tan_half_y = std::tan(0.5 * cam.fov_y);
    v.tan_half_x = v.tan_half_y * static_cast<double>(cam.width) / cam.height;
    return v;
}

PinholeView emitter_view(const Scene& scene, const Vec3& emitter_center, const ShadowMapSettings& settings)
{
    if (settings.height <= 0 || settings.width <= 0) throw std::invalid_argument("shadow map resolution must be positive");
    PinholeView v = emitter_basis(scene, emitter_center);
    v.height = settings.height;
    v.width = settings.width;
    const double aspect = static_cast<double>(settings.width) / settings.height;
    if (settings.fov > 0.0) {
        if (!(settings.fov < M_PI)) throw std::invalid_argument("shadow map fov must lie in (0, pi)");
        v.tan_half_y = std::tan(0.5 * settings.fov);
    } else {
        double t = 0.0;
        for (const Vec3& c : scene.bounds().corners()) {
            const Vec3 pv = to_view(v, c);
            if (!(pv.z() > kNear)) throw FrustumError("scene bounds extend behind the emitter");
            t = std::max({t, std::abs(pv.x()) / pv.z() / aspect, std::abs(pv.y()) / pv.z()});
        }
        v.tan_half_y = t * 1.01;
    }
    v.tan_half_x = v.tan_half_y * aspect;
    return v;
}

double default_depth_bias(const Scene& scene) { return 1e-3 * scene.diagonal(); }

ShadowMap render_shadowmap(const Scene& scene, const Emitter& emitter, const ShadowMapSettings& settings)
{
    if (scene.inside_solid(emitter.center)) throw FrustumError("emitter center lies inside scene geometry");
    ShadowMap sm;
    sm.view = emitter_view(scene, emitter.center, settings);
    const DepthTarget t = rasterize(scene, sm.view);
    sm.depth.resize(t.depth.size());
    for (std::size_t i = 0; i < t.depth.size(); ++i) sm.depth[i] = static_cast<float>(t.depth[i]);
    return sm;
}

GBuffer render_gbuffer(const Scene& scene, const CameraPose& camera, const Emitter& emitter)
{
    validate(camera);
    const PinholeView view = camera_view(camera);
    const PinholeView ev = emitter_basis(scene, emitter.center);
    const DepthTarget t = rasterize(scene, view);

    GBuffer g;
    g.height = camera.height;
    g.width = camera.width;
    g.camera = camera;
    g.emitter_center = emitter.center;
    const std::size_t n = g.pixels();
    g.depth.assign(n, 0.0f);
    g.normal.assign(n, Eigen::Vector3f::Zero());
    g.position.assign(n, Eigen::Vector3f::Zero());
    g.normal_e.assign(n, Eigen::Vector3f::Zero());
    g.z_f.assign(n, 0.0f);
    g.c_e.assign(n, 0.0f);
    g.c_c.assign(n, 0.0f);
    g.covered.assign(n, 0);
    g.object = t.object;

    parallel_for(0, static_cast<std::size_t>(g.height), [&](std::size_t y) {
        for (int x = 0; x < g.width; ++x) {
            const std::size_t i = y * g.width + x;
            const double d = t.depth[i];
            if (!std::isfinite(d)) continue;
            const Vec3 p = view.eye + d * view.depth_direction(x + 0.5, static_cast<double>(y) + 0.5);
            const Vec3& nrm = t.normal[i];
            const Vec3 to_e = emitter.center - p;
            const double zf = to_e.norm();
            g.covered[i] = 1;
            g.depth[i] = static_cast<float>(d);
            g.position[i] = p.cast<float>();
            g.normal[i] = nrm.cast<float>();
            g.normal_e[i] = Eigen::Vector3f(static_cast<float>(nrm.dot(ev.right)), static_cast<float>(nrm.dot(ev.up)),
                                            static_cast<float>(nrm.dot(ev.forward)));
            g.z_f[i] = static_cast<float>(zf);
            g.c_e[i] = static_cast<float>(std::clamp(nrm.dot(to_e / zf), 0.0, 1.0));
            g.c_c[i] = static_cast<float>(std::clamp(nrm.dot((view.eye - p).normalized()), 0.0, 1.0));
        }
    });
    return g;
}

std::vector<float> lookup_occluder_distance(const GBuffer& g, const ShadowMap& sm)
{
    const std::size_t n = g.pixels();
    std::vector<float> z(n, 0.0f);
    const PinholeView& v = sm.view;
    for (std::size_t i = 0; i < n; ++i) {
        if (!g.covered[i]) continue;
        const Vec3 p = g.position[i].cast<double>();
        const auto proj = v.project(p);
        const int tx = proj ? static_cast<int>(std::floor(proj->x)) : -1;
        const int ty = proj ? static_cast<int>(std::floor(proj->y)) : -1;
        if (!proj || tx < 0 || ty < 0 || tx >= v.width || ty >= v.height) {
            throw FrustumError("covered pixel (" + std::to_string(i % g.width) + "," + std::to_string(i / g.width) +
                               ") projects outside the shadow map");
        }
        const float zax = sm.at(tx, ty);
        if (!std::isfinite(zax)) {
            z[i] = g.z_f[i];
            continue;
        }
        const Vec3 dv = p - v.eye;
        z[i] = static_cast<float>(zax * dv.norm() / dv.dot(v.forward));
    }
    return z;
}

FeatureStack assemble_features(const GBuffer& g, const ShadowMap& sm, double size_index, double bias)
{
    if (!(size_index >= 0.0 && size_index <= kMaxSizeIndex)) throw std::invalid_argument("size_index must lie in [0, 4]");
    const std::vector<float> z = lookup_occluder_distance(g, sm);
    FeatureStack fs;
    fs.channels = Tensor<float>::chw(kFeatureChannels, g.height, g.width);
    fs.covered = g.covered;
    fs.size_index = size_index;
    fs.bias = bias;
    const std::size_t plane = g.pixels();
    float* out = fs.channels.data();
    for (std::size_t i = 0; i < plane; ++i) {
        if (!g.covered[i]) continue;
        out[i] = z[i] - g.z_f[i];
        out[plane + i] = z[i] / g.z_f[i];
        out[2 * plane + i] = static_cast<float>(g.c_e[i] + size_index);
        out[3 * plane + i] = g.c_c[i] / g.depth[i];
    }
    return fs;
}

std::vector<float> hard_shadow(const FeatureStack& fs)
{
    const std::size_t plane = fs.channels.plane();
    std::vector<float> vis(plane, 1.0f);
    for (std::size_t i = 0; i < plane; ++i)
        if (fs.covered[i]) vis[i] = fs.channels[i] < -fs.bias ? 0.0f : 1.0f;
    return vis;
}

MotionField motion_vectors(const GBuffer& g_t, const CameraPose& camera_prev, const GBuffer& g_prev)
{
    if (g_t.height != g_prev.height || g_t.width != g_prev.width)
        throw std::invalid_argument("motion_vectors: frame resolutions differ");
    MotionField m;
    m.height = g_t.height;
    m.width = g_t.width;
    m.vec.assign(g_t.pixels(), Eigen::Vector2f::Zero());
    m.valid.assign(g_t.pixels(), 0);
    const PinholeView prev = camera_view(camera_prev);
    for (int y = 0; y < g_t.height; ++y) {
        for (int x = 0; x < g_t.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * g_t.width + x;
            if (!g_t.covered[i]) continue;
            const auto proj = prev.project(g_t.position[i].cast<double>());
            if (!proj) continue;
            m.vec[i] = Eigen::Vector2f(static_cast<float>(proj->x - (x + 0.5)), static_cast<float>(proj->y - (y + 0.5)));
            const int qx = static_cast<int>(std::floor(proj->x));
            const int qy = static_cast<int>(std::floor(proj->y));
            if (qx < 0 || qy < 0 || qx >= g_prev.width || qy >= g_prev.height) continue;
            const std::size_t q = static_cast<std::size_t>(qy) * g_prev.width + qx;
            if (!g_prev.covered[q]) continue;
            const double dprev = g_prev.depth[q];
            if (std::abs(proj->depth - dprev) > 0.01 * dprev) continue;
            if (g_t.normal[i].dot(g_prev.normal[q]) < 0.9f) continue;
            m.valid[i] = 1;
        }
    }
    return m;
}

std::vector<NamedChannel> candidate_channels(const GBuffer& g, const ShadowMap& sm, double size_index)
{
    const std::vector<float> z = lookup_occluder_distance(g, sm);
    const std::size_t n = g.pixels();
    auto make = [&](std::string name, auto fn) {
        NamedChannel c{std::move(name), std::vector<float>(n, 0.0f)};
        for (std::size_t i = 0; i < n; ++i)
            if (g.covered[i]) c.values[i] = static_cast<float>(fn(i));
        return c;
    };
    std::vector<NamedChannel> out;
    out.push_back(make("d", [&](std::size_t i) { return g.depth[i]; }));
    out.push_back(make("n.x", [&](std::size_t i) { return g.normal[i].x(); }));
    out.push_back(make("n.y", [&](std::size_t i) { return g.normal[i].y(); }));
    out.push_back(make("n.z", [&](std::size_t i) { return g.normal[i].z(); }));
    out.push_back(make("z", [&](std::size_t i) { return z[i]; }));
    out.push_back(make("n_e.x", [&](std::size_t i) { return g.normal_e[i].x(); }));
    out.push_back(make("n_e.y", [&](std::size_t i) { return g.normal_e[i].y(); }));
    out.push_back(make("n_e.z", [&](std::size_t i) { return g.normal_e[i].z(); }));
    out.push_back(make("z_f", [&](std::size_t i) { return g.z_f[i]; }));
    out.push_back(make("c_e", [&](std::size_t i) { return g.c_e[i] + size_index; }));
    out.push_back(make("c_c", [&](std::size_t i) { return g.c_c[i]; }));
    out.push_back(make("z-z_f", [&](std::size_t i) { return z[i] - g.z_f[i]; }));
    out.push_back(make("z/z_f", [&](std::size_t i) { return z[i] / g.z_f[i]; }));
    out.push_back(make("c_c/d", [&](std::size_t i) { return g.c_c[i] / g.depth[i]; }));
    out.push_back(make("n.n_e", [&](std::size_t i) { return g.normal[i].dot(g.normal_e[i]); }));
    return out;
}

} // namespace nsm
