#include "nsm/rt_oracle.hpp"

#include "nsm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsm {

namespace {

// Visibility of the emitter sphere from `origin` using the given uniform pairs.
double cone_visibility(const Scene& scene, const Vec3& origin, const Vec3& center, double radius,
                       const std::vector<std::pair<double, double>>& uv)
{
    const Vec3 to_c = center - origin;
    const double dist = to_c.norm();
    if (radius <= 0.0) {
        const Ray r{origin, to_c / dist};
        return scene.occluded(r, 0.0, dist) ? 0.0 : 1.0;
    }
    if (radius >= dist) return 1.0;
    const Vec3 w = to_c / dist;
    const Vec3 a = std::abs(w.x()) > 0.9 ? Vec3::UnitY() : Vec3::UnitX();
    const Vec3 u = w.cross(a).normalized();
    const Vec3 v = w.cross(u);
    const double cos_max = std::sqrt(std::max(0.0, 1.0 - (radius * radius) / (dist * dist)));
    const double c_sq = dist * dist - radius * radius;
    int lit = 0;
    for (const auto& [u1, u2] : uv) {
        const double cos_t = 1.0 - u1 * (1.0 - cos_max);
        const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
        const double phi = 2.0 * M_PI * u2;
        const Vec3 d = (std::cos(phi) * sin_t) * u + (std::sin(phi) * sin_t) * v + cos_t * w;
        const double b = d.dot(to_c);
        const double t_hit = b - std::sqrt(std::max(0.0, b * b - c_sq));
        if (!scene.occluded(Ray{origin, d}, 0.0, t_hit)) ++lit;
    }
    return static_cast<double>(lit) / static_cast<double>(uv.size());
}

std::vector<std::pair<double, double>> draw_pairs(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<std::pair<double, double>> uv(static_cast<std::size_t>(n));
    for (auto& p : uv) {
        p.first = u01(rng);
        p.second = u01(rng);
    }
    return uv;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t stream_seed(std::uint64_t frame_seed, std::uint64_t pixel, std::uint64_t sample)
{
    return splitmix64(splitmix64(splitmix64(frame_seed) ^ pixel) ^ (sample * 0x632be59bd9b4e019ULL));
}

std::vector<std::pair<double, double>> msaa_pattern(int msaa)
{
    const double s = 1.0 / 16.0;
    switch (msaa) {
    case 1:
        return {{0.0, 0.0}};
    case 2:
        return {{4 * s, 4 * s}, {-4 * s, -4 * s}};
    case 4:
        return {{-2 * s, -6 * s}, {6 * s, -2 * s}, {-6 * s, 2 * s}, {2 * s, 6 * s}};
    case 8:
        return {{1 * s, -3 * s}, {-1 * s, 3 * s}, {5 * s, 1 * s},  {-3 * s, -5 * s},
                {-5 * s, 5 * s}, {-7 * s, -1 * s}, {3 * s, 7 * s}, {7 * s, -7 * s}};
    default:
        throw std::invalid_argument("msaa must be 1, 2, 4 or 8");
    }
}

double point_visibility(const Scene& scene, const Vec3& point, const Vec3& normal, const Vec3& emitter_center,
                        double emitter_radius, int samples, double eps, std::mt19937_64& rng)
{
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    const Vec3 origin = point + eps * normal;
    if (emitter_radius <= 0.0) return cone_visibility(scene, origin, emitter_center, 0.0, {});
    return cone_visibility(scene, origin, emitter_center, emitter_radius, draw_pairs(samples, rng));
}

std::vector<TargetImage> trace_visibility_multi(const Scene& scene, const CameraPose& camera, const Vec3& emitter_center,
                                                const std::vector<double>& size_indices, const TraceSettings& settings)
{
    validate(camera);
    if (settings.spp < 1) throw std::invalid_argument("spp must be >= 1");
    const auto pattern = msaa_pattern(settings.msaa);
    const int rays = std::max(1, settings.spp / settings.msaa);
    const double eps = 1e-4 * scene.diagonal();
    std::vector<double> radii;
    for (double s : size_indices) radii.push_back(emitter_radius(s));

    const int h = camera.height, w = camera.width;
    std::vector<TargetImage> out(size_indices.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j].visibility = Tensor<float>::chw(1, h, w);
        out[j].size_index = size_indices[j];
        out[j].spp = rays * settings.msaa;
        out[j].msaa = settings.msaa;
    }

    parallel_for(0, static_cast<std::size_t>(h), [&](std::size_t y) {
        std::vector<double> acc(radii.size());
        for (int x = 0; x < w; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const std::uint64_t pixel = y * static_cast<std::uint64_t>(w) + x;
            for (std::size_t s = 0; s < pattern.size(); ++s) {
                const Ray primary = camera.ray_through(x + 0.5 + pattern[s].first, static_cast<double>(y) + 0.5 + pattern[s].second);
                const auto hit = scene.intersect(primary);
                if (!hit) {
                    for (auto& a : acc) a += 1.0;
                    continue;
                }
                const Vec3 p = primary.at(hit->t);
                const Vec3 n = hit->normal.dot(primary.dir) > 0.0 ? Vec3(-hit->normal) : hit->normal;
                const Vec3 origin = p + eps * n;
                std::mt19937_64 rng(stream_seed(settings.seed, pixel, s));
                const auto uv = draw_pairs(rays, rng);
                for (std::size_t j = 0; j < radii.size(); ++j)
                    acc[j] += cone_visibility(scene, origin, emitter_center, radii[j], uv);
            }
            for (std::size_t j = 0; j < radii.size(); ++j)
                out[j].visibility.at(0, y, x) = static_cast<float>(acc[j] / static_cast<double>(pattern.size()));
        }
    });
    return out;
}

TargetImage trace_visibility(const Scene& scene, const CameraPose& camera, const Emitter& emitter,
                             const TraceSettings& settings)
{
    return trace_visibility_multi(scene, camera, emitter.center, {emitter.size_index}, settings).front();
}

std::vector<double> gaussian_taps(double sigma)
{
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (sigma == 0.0) return {1.0};
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(radius) + 1);
    double total = 0.0;
    for (int k = 0; k <= radius; ++k) {
        taps[k] = std::exp(-0.5 * k * k / (sigma * sigma));
        total += (k == 0 ? 1.0 : 2.0) * taps[k];
    }
    for (auto& t : taps) t /= total;
    return taps;
}

TargetImage gaussian_filter(const TargetImage& img, double sigma)
{
    const auto taps = gaussian_taps(sigma);
    if (taps.size() == 1) return img;
    const int r = static_cast<int>(taps.size()) - 1;
    const int h = img.height(), w = img.width();
    const Tensor<float>& src = img.visibility;
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) acc += taps[std::abs(k)] * src.at(0, y, std::clamp(x + k, 0, w - 1));
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    TargetImage out = img;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) acc += taps[std::abs(k)] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
            out.visibility.at(0, y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    return out;
}

} // namespace nsm
