#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsm/raster.hpp"
#include "nsm/rt_oracle.hpp"

#include <cmath>
#include <random>

using namespace nsm;

namespace {

CameraPose look_at(const Vec3& eye, const Vec3& target, int h = 64, int w = 128, double fov = 0.9)
{
    CameraPose c;
    c.position = eye;
    c.forward = (target - eye).normalized();
    c.up = Vec3(0, 1, 0);
    c.height = h;
    c.width = w;
    c.fov_y = fov;
    return c.orthonormalized();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

Scene two_planes()
{
    std::vector<Primitive> objs{{"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 3.0, 3.0}},
                                {"card", Plane{Vec3(0, 2.5, 0), Vec3::UnitY(), Vec3::UnitX(), 0.5, 0.5}}};
    return Scene(objs, Emitter{Vec3(0, 5, 0), 0.0});
}

std::size_t pixel_of(const CameraPose& cam, const Vec3& p)
{
    const auto pr = cam.project(p);
    REQUIRE(pr);
    return static_cast<std::size_t>(std::floor(pr->y)) * cam.width + static_cast<std::size_t>(std::floor(pr->x));
}

} // namespace

TEST_CASE("shadow map texels that see nothing hold the infinity sentinel")
{
    // a lone ball: the frustum fits its bounds so the map corners miss it
    std::vector<Primitive> objs{{"ball", Sphere{Vec3::Zero(), 1.0}}};
    const Scene scene(objs, Emitter{Vec3(0, 5, 0), 0.0});
    const auto sm = render_shadowmap(scene, scene.emitter(), {64, 64, 0.0});
    CHECK(std::isinf(sm.at(0, 0)));
    CHECK(std::isinf(sm.at(63, 63)));
    CHECK(sm.at(32, 32) == doctest::Approx(4.0).epsilon(1e-3));
    for (float v : sm.depth) CHECK((std::isinf(v) || v >= 0.0f));
}

TEST_CASE("plane perpendicular to the emitter axis has constant depth")
{
    std::vector<Primitive> objs{{"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 2.0, 2.0}}};
    const Scene scene(objs, Emitter{Vec3(0, 5, 0), 0.0});
    const auto sm = render_shadowmap(scene, scene.emitter(), {128, 128, 0.0});
    int finite = 0;
    for (float v : sm.depth)
        if (std::isfinite(v)) {
            ++finite;
            CHECK(v == doctest::Approx(5.0).epsilon(1e-6));
        }
    CHECK(finite > 128 * 128 / 2);
}

TEST_CASE("shadow map matches per-texel ray casts")
{
    const Scene scene = sphere_over_plane(1.0, 4.0, 2.0);
    const auto sm = render_shadowmap(scene, scene.emitter(), {128, 128, 0.0});
    int mismatched = 0, compared = 0;
    for (int y = 0; y < sm.height(); ++y)
        for (int x = 0; x < sm.width(); ++x) {
            const Vec3 dir = sm.view.depth_direction(x + 0.5, y + 0.5);
            const auto hit = scene.intersect(Ray{sm.view.eye, dir.normalized()});
            const float z = sm.at(x, y);
            if (!hit || !std::isfinite(z)) {
                mismatched += static_cast<bool>(hit) != std::isfinite(z);
                continue;
            }
            ++compared;
            CHECK(rel_err(z, hit->t / dir.norm()) < 1e-6);
        }
    CHECK(mismatched == 0);
    CHECK(compared > 1000);
}

TEST_CASE("G-buffer matches per-pixel ray casts")
{
    TriMesh tri;
    tri.vertices = {Vec3(1, 0.01, 0.5), Vec3(2, 0.01, 1.0), Vec3(1.5, 1.0, 0.2)};
    tri.faces = {{0, 1, 2}};
    std::vector<Primitive> objs{{"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 3.0, 3.0}},
                                {"ball", Sphere{Vec3(0, 1, 0), 0.5}},
                                {"crate", Box{Vec3(-2, 0, -1), Vec3(-1.2, 0.7, -0.3)}},
                                {"tri", tri}};
    const Scene scene(objs, Emitter{Vec3(0.5, 4, 0.3), 2.0});
    const CameraPose cam = look_at(Vec3(0.3, 2.5, 5.0), Vec3(0, 0.3, 0));
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());

    int mismatched = 0, compared = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * cam.width + x;
            const auto hit = scene.intersect(cam.ray_through(x + 0.5, y + 0.5));
            if (!hit || !g.covered[i]) {
                mismatched += static_cast<bool>(hit) != static_cast<bool>(g.covered[i]);
                continue;
            }
            ++compared;
            const Ray r = cam.ray_through(x + 0.5, y + 0.5);
            const Vec3 p = r.at(hit->t);
            const double d = hit->t * r.dir.dot(cam.forward);
            const Vec3 to_e = scene.emitter().center - p;
            CHECK(rel_err(g.depth[i], d) < 1e-6);
            CHECK((g.position[i].cast<double>() - p).norm() / p.norm() < 1e-6);
            CHECK((g.normal[i].cast<double>() - hit->normal).norm() < 1e-6);
            CHECK(rel_err(g.z_f[i], to_e.norm()) < 1e-6);
            CHECK(std::abs(g.c_e[i] - std::max(0.0, hit->normal.dot(to_e.normalized()))) < 1e-6);
            CHECK(std::abs(g.c_c[i] - std::max(0.0, -hit->normal.dot(r.dir))) < 1e-6);
            CHECK(g.object[i] == hit->object);
            CHECK(g.normal[i].norm() == doctest::Approx(1.0f).epsilon(1e-6));
            CHECK(g.normal_e[i].norm() == doctest::Approx(1.0f).epsilon(1e-6));
            CHECK(g.depth[i] > 0.0f);
            CHECK(g.z_f[i] > 0.0f);
        }
    CHECK(mismatched == 0);
    CHECK(compared > cam.height * cam.width / 3);
}

TEST_CASE("G-buffer examples")
{
    std::vector<Primitive> objs{{"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 3.0, 3.0}}};
    const Scene scene(objs, Emitter{Vec3(0, 3, 0), 1.0});
    // odd resolution so the central pixel ray runs along the optical axis
    CameraPose cam;
    cam.position = Vec3(0, 2, 0);
    cam.forward = Vec3(0, -1, 0);
    cam.up = Vec3(0, 0, -1);
    cam.height = 33;
    cam.width = 33;
    cam.fov_y = 0.5;
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());
    const std::size_t c = 16 * 33 + 16;
    REQUIRE(g.covered[c]);
    CHECK(g.z_f[c] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(g.c_c[c] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.c_e[c] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.depth[c] == doctest::Approx(2.0).epsilon(1e-6));
    // emitter forward points straight down, so the ground normal is (0, 0, -1) in its frame
    CHECK(g.normal_e[c].z() == doctest::Approx(-1.0f).epsilon(1e-6));
}

TEST_CASE("feature stack examples")
{
    const Scene scene = two_planes();
    const CameraPose cam = look_at(Vec3(0, 1, 6), Vec3(0, 0, 0));
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());
    const auto sm = render_shadowmap(scene, scene.emitter(), {256, 256, 0.0});
    const double bias = default_depth_bias(scene);
    const FeatureStack fs = assemble_features(g, sm, 3.0, bias);
    const std::size_t plane = fs.channels.plane();

    // ground point below the card: the occluder sits at half the emitter distance
    const std::size_t shaded = pixel_of(cam, Vec3(0, 0, 0));
    CHECK(fs.channels[plane + shaded] == doctest::Approx(0.5).epsilon(0.01));
    CHECK(fs.channels[shaded] == doctest::Approx(-0.5 * g.z_f[shaded]).epsilon(0.01));

    // open ground: the lookup returns the receiver itself
    const std::size_t lit = pixel_of(cam, Vec3(2, 0, 2));
    CHECK(std::abs(fs.channels[lit]) < 1e-4);
    CHECK(fs.channels[plane + lit] == doctest::Approx(1.0).epsilon(1e-5));

    for (std::size_t i = 0; i < plane; ++i) {
        if (!fs.covered[i]) {
            for (int ch = 0; ch < 4; ++ch) CHECK(fs.channels[ch * plane + i] == 0.0f);
            continue;
        }
        const float ce = fs.channels[2 * plane + i] - 3.0f;
        CHECK(std::abs(ce - g.c_e[i]) < 1e-6f);
        CHECK(ce >= 0.0f);
        CHECK(ce <= 1.0f);
        CHECK(fs.channels[plane + i] <= 1.0f + 1e-5f);
        CHECK(fs.channels[plane + i] >= 0.0f);
        CHECK(fs.channels[3 * plane + i] == doctest::Approx(g.c_c[i] / g.depth[i]));
    }

    // c_e of 0.4 with size 3 encodes as 3.4
    GBuffer g2 = g;
    g2.c_e[lit] = 0.4f;
    CHECK(assemble_features(g2, sm, 3.0, bias).channels[2 * plane + lit] == doctest::Approx(3.4f));
}

TEST_CASE("covered pixels outside the shadow map are rejected")
{
    const Scene scene = two_planes();
    const CameraPose cam = look_at(Vec3(0, 1, 6), Vec3(0, 0, 0));
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());
    const auto narrow = render_shadowmap(scene, scene.emitter(), {64, 64, 0.2});
    CHECK_THROWS_AS(assemble_features(g, narrow, 0.0, 0.0), FrustumError);

    std::vector<Primitive> objs{{"ball", Sphere{Vec3::Zero(), 1.0}}};
    const Scene inside(objs, Emitter{Vec3(0, 0.5, 0), 0.0});
    CHECK_THROWS_AS(render_shadowmap(inside, inside.emitter()), FrustumError);
}

TEST_CASE("hard shadow agrees with point-light ray tracing")
{
    const Scene scene = sphere_over_plane(1.0, 4.0, 0.0);
    const CameraPose cam = look_at(Vec3(0, 3, 5), Vec3(0, 0.2, 0), 128, 256, 0.8);
    const GBuffer g = render_gbuffer(scene, cam, scene.emitter());
    const auto sm = render_shadowmap(scene, scene.emitter(), {512, 1024, 0.0});
    const FeatureStack fs = assemble_features(g, sm, 0.0, default_depth_bias(scene));
    const auto hard = hard_shadow(fs);
    const auto rt = trace_visibility(scene, cam, scene.emitter(), TraceSettings{1, 1, 5});
    int covered = 0, agree = 0, shadowed = 0;
    for (std::size_t i = 0; i < hard.size(); ++i) {
        if (!fs.covered[i]) continue;
        ++covered;
        agree += hard[i] == rt.visibility[i];
        shadowed += rt.visibility[i] == 0.0f;
    }
    CHECK(shadowed > 500);
    CHECK(static_cast<double>(agree) / covered >= 0.98);
}

TEST_CASE("motion vector examples")
{
    std::vector<Primitive> objs{{"wall", Plane{Vec3(0, 0, -5), Vec3::UnitZ(), Vec3::UnitX(), 20.0, 20.0}},
                                {"ball", Sphere{Vec3(0, 0, -3), 0.5}}};
    const Scene scene(objs, Emitter{Vec3(0, 0, 2), 0.0});
    const CameraPose prev = look_at(Vec3(0, 0, 0), Vec3(0, 0, -1));

    SUBCASE("static")
    {
        const GBuffer g = render_gbuffer(scene, prev, scene.emitter());
        const auto m = motion_vectors(g, prev, g);
        for (std::size_t i = 0; i < g.pixels(); ++i) {
            CHECK(m.valid[i] == g.covered[i]);
            CHECK(m.vec[i].norm() < 1e-4f);
        }
    }
    SUBCASE("camera slides parallel to the wall")
    {
        std::vector<Primitive> wall{objs[0]};
        const Scene flat(wall, scene.emitter());
        CameraPose cur = prev;
        cur.position.x() += 0.1;
        const GBuffer gp = render_gbuffer(flat, prev, flat.emitter());
        const GBuffer gc = render_gbuffer(flat, cur, flat.emitter());
        const auto m = motion_vectors(gc, prev, gp);
        const double shift = 0.1 * prev.focal_px() / 5.0;
        int valid = 0;
        for (std::size_t i = 0; i < gc.pixels(); ++i) {
            const int x = static_cast<int>(i % gc.width);
            if (x + 0.5 + shift >= gc.width) {
                CHECK_FALSE(m.valid[i]);
                continue;
            }
            valid += m.valid[i];
            CHECK(m.vec[i].x() == doctest::Approx(shift).epsilon(1e-4));
            CHECK(std::abs(m.vec[i].y()) < 1e-4f);
        }
        CHECK(valid > static_cast<int>(gc.pixels()) * 3 / 4);
    }
    SUBCASE("disocclusion")
    {
        Scene moved = scene.with_object_offset(1, Vec3(0.8, 0, 0));
        const GBuffer gp = render_gbuffer(scene, prev, scene.emitter());
        const GBuffer gc = render_gbuffer(moved, prev, moved.emitter());
        const auto m = motion_vectors(gc, prev, gp);
        // the wall behind the ball's old position reappears
        const std::size_t i = pixel_of(prev, Vec3(-0.2, 0, -5));
        CHECK(gc.object[i] == 0);
        CHECK(gp.object[i] == 1);
        CHECK_FALSE(m.valid[i]);
        CHECK(m.valid[pixel_of(prev, Vec3(3, 2, -5))]);
    }
}
