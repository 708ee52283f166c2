#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsm/scene.hpp"

#include <cmath>
#include <random>

using namespace nsm;

namespace {

CameraPose pose_at(const Vec3& p)
{
    CameraPose c;
    c.position = p;
    return c;
}

std::vector<Keyframe<CameraPose>> two_keys()
{
    return {{0.0, pose_at(Vec3(0, 0, 0))}, {1.0, pose_at(Vec3(2, 0, 0))}};
}

} // namespace

TEST_CASE("trajectory_at examples")
{
    const auto keys = two_keys();
    CHECK(trajectory_at(keys, 0.0).position == Vec3(0, 0, 0));
    CHECK(trajectory_at(keys, 1.0).position == Vec3(2, 0, 0));
    CHECK((trajectory_at(keys, 0.5).position - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK(trajectory_at(keys, -1.0).position == Vec3(0, 0, 0));
    CHECK(trajectory_at(keys, 7.0).position == Vec3(2, 0, 0));

    std::vector<Keyframe<Vec3>> pts{{0.0, Vec3(0, 1, 0)}, {2.0, Vec3(0, 3, 0)}, {3.0, Vec3(1, 3, 0)}};
    CHECK((trajectory_at(pts, 1.0) - Vec3(0, 2, 0)).norm() < 1e-15);
    CHECK((trajectory_at(pts, 2.5) - Vec3(0.5, 3, 0)).norm() < 1e-15);
}

TEST_CASE("keyframes must be strictly increasing")
{
    std::vector<Keyframe<Vec3>> bad{{0.0, Vec3::Zero()}, {0.0, Vec3::Ones()}};
    CHECK_THROWS_AS(validate_keys(bad), std::invalid_argument);
    CHECK_THROWS_AS(validate_keys(std::vector<Keyframe<Vec3>>{}), std::invalid_argument);
}

TEST_CASE("interpolated directions stay orthonormal and continuous")
{
    CameraPose a = pose_at(Vec3(0, 1, 5));
    CameraPose b = pose_at(Vec3(3, 2, 4));
    b.forward = Vec3(1, -0.2, -0.3).normalized();
    std::vector<Keyframe<CameraPose>> keys{{0.0, a}, {1.0, b}, {2.5, a}};
    for (double t : {0.0, 1.0, 2.5}) {
        for (double dt : {1e-6, 1e-8}) {
            const auto l = trajectory_at(keys, t - dt), r = trajectory_at(keys, t + dt);
            CHECK((l.position - r.position).norm() < 1e3 * dt);
            CHECK((l.forward - r.forward).norm() < 1e3 * dt);
        }
    }
    for (double t = -0.5; t < 3.0; t += 0.037) {
        const auto c = trajectory_at(keys, t);
        CHECK(c.forward.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.up.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(c.forward.dot(c.up)) < 1e-12);
    }
}

TEST_CASE("sample_perturbation examples")
{
    std::vector<Primitive> objs{{"ball", Sphere{Vec3::Zero(), 1.0}}};
    const Scene scene(objs, Emitter{Vec3(0, 5, 0), 2.0});
    const CameraPose cam = pose_at(Vec3(0, 0, 10)); // d_scene = 10

    std::mt19937_64 rng(3);
    PerturbationSpec zero;
    zero.camera_scale = 0.0;
    zero.emitter_scale = 0.0;
    for (const auto& s : sample_perturbation(scene, cam, zero, rng)) {
        CHECK(s.camera.position == cam.position);
        CHECK(s.emitter.center == scene.emitter().center);
    }

    PerturbationSpec spec; // k1 = 0.01, k2 = 0.1, p = 3
    const auto out = sample_perturbation(scene, cam, spec, rng);
    REQUIRE(out.size() == 3);
    const double r_e = emitter_radius(2.0);
    for (const auto& s : out) {
        CHECK((s.camera.position - cam.position).norm() == doctest::Approx(0.1).epsilon(1e-12));
        CHECK((s.emitter.center - scene.emitter().center).norm() == doctest::Approx(0.1 * r_e).epsilon(1e-12));
        CHECK(s.camera.forward == cam.forward);
        CHECK(s.camera.up == cam.up);
        CHECK(s.emitter.size_index == 2.0);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) CHECK(out[i].camera.position != out[j].camera.position);

    // point lights still move by the minimum radius
    const Scene point(objs, Emitter{Vec3(0, 5, 0), 0.0});
    for (const auto& s : sample_perturbation(point, cam, spec, rng))
        CHECK((s.emitter.center - point.emitter().center).norm() == doctest::Approx(0.1 * kMinPerturbRadius));
}

TEST_CASE("perturbation norms are exact for arbitrary scales")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        const Scene scene = sphere_over_plane(1.0 + u(rng), 4.0, 4.0 * u(rng) * 2);
        const CameraPose cam = pose_at(Vec3(u(rng), 2 + u(rng), 6 + u(rng)));
        PerturbationSpec spec;
        spec.count = 5;
        spec.camera_scale = u(rng);
        spec.emitter_scale = u(rng);
        const double d_scene = (cam.position - scene.bounds().center()).norm();
        const double re = std::max(scene.emitter().radius(), kMinPerturbRadius);
        for (const auto& s : sample_perturbation(scene, cam, spec, rng)) {
            CHECK((s.camera.position - cam.position).norm() == doctest::Approx(spec.camera_scale * d_scene));
            CHECK((s.emitter.center - scene.emitter().center).norm() == doctest::Approx(spec.emitter_scale * re));
        }
    }
}

TEST_CASE("emitter radius mapping")
{
    CHECK(emitter_radius(0.0) == 0.0);
    CHECK(emitter_radius(4.0) == 0.25);
    CHECK(emitter_radius(1.0) == 0.0625);
    double prev = -1.0;
    for (double s = 0.0; s <= 4.0; s += 0.125) {
        CHECK(emitter_radius(s) > prev);
        prev = emitter_radius(s);
    }
    CHECK_THROWS(emitter_radius(-0.1));
    CHECK_THROWS(emitter_radius(4.5));
}

TEST_CASE("scene construction and bounds")
{
    CHECK_THROWS_AS(Scene({}, Emitter{}), std::invalid_argument);
    std::vector<Primitive> bad{{"nan", Sphere{Vec3(0, std::nan(""), 0), 1.0}}};
    CHECK_THROWS_AS(Scene(bad, Emitter{}), std::invalid_argument);

    TriMesh tri;
    tri.vertices = {Vec3(4, 0, 0), Vec3(5, 0, 0), Vec3(4, 1, -2)};
    tri.faces = {{0, 1, 2}};
    std::vector<Primitive> objs{{"ground", Plane{Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 2.0, 3.0}},
                                {"ball", Sphere{Vec3(0, 1, 0), 0.5}},
                                {"crate", Box{Vec3(-3, 0, -1), Vec3(-2, 1, 0)}},
                                {"tri", tri}};
    const Scene scene(objs, Emitter{Vec3(0, 5, 0), 1.0});
    for (const auto& p : scene.objects()) CHECK(scene.bounds().contains(nsm::bounds(p)));
    CHECK(scene.bounds().lo.x() == doctest::Approx(-3.0));
    CHECK(scene.bounds().hi.x() == doctest::Approx(5.0));
    CHECK(scene.bounds().hi.y() == doctest::Approx(1.5));
}

TEST_CASE("ray intersection against analytic hits")
{
    TriMesh tri;
    tri.vertices = {Vec3(-1, -1, -4), Vec3(1, -1, -4), Vec3(0, 1, -4)};
    tri.faces = {{0, 1, 2}};
    std::vector<Primitive> objs{{"ball", Sphere{Vec3(0, 0, -10), 2.0}},
                                {"crate", Box{Vec3(2, -1, -7), Vec3(4, 1, -5)}},
                                {"tri", tri}};
    const Scene scene(objs, Emitter{Vec3(0, 5, 0), 1.0});

    auto h = scene.intersect(Ray{Vec3::Zero(), Vec3(0, 0, -1)});
    REQUIRE(h);
    CHECK(h->object == 2);
    CHECK(h->t == doctest::Approx(4.0));
    CHECK((h->normal - Vec3(0, 0, 1)).norm() < 1e-12);

    h = scene.intersect(Ray{Vec3::Zero(), Vec3(0, 0, -1)}, 4.5);
    REQUIRE(h);
    CHECK(h->object == 0);
    CHECK(h->t == doctest::Approx(8.0));

    h = scene.intersect(Ray{Vec3(3, 0, 0), Vec3(0, 0, -1)});
    REQUIRE(h);
    CHECK(h->object == 1);
    CHECK(h->t == doctest::Approx(5.0));
    CHECK((h->normal - Vec3(0, 0, 1)).norm() < 1e-12);

    CHECK_FALSE(scene.intersect(Ray{Vec3::Zero(), Vec3(0, 1, 0)}));
    CHECK(scene.occluded(Ray{Vec3::Zero(), Vec3(0, 0, -1)}, 0.0, 5.0));
    CHECK_FALSE(scene.occluded(Ray{Vec3::Zero(), Vec3(0, 0, -1)}, 0.0, 3.9));

    CHECK(scene.inside_solid(Vec3(0, 0, -10)));
    CHECK(scene.inside_solid(Vec3(3, 0, -6)));
    CHECK_FALSE(scene.inside_solid(Vec3(0, 0, -4)));
}

TEST_CASE("camera projection round-trips pixel rays")
{
    CameraPose cam = pose_at(Vec3(1, 2, 3));
    cam.forward = Vec3(-0.3, -0.4, -1.0);
    cam = cam.orthonormalized();
    for (double px : {0.5, 17.25, 255.5})
        for (double py : {0.5, 64.0, 127.5}) {
            const Vec3 dir = cam.depth_direction(px, py);
            CHECK(dir.dot(cam.forward) == doctest::Approx(1.0));
            const auto pr = cam.project(cam.position + 3.5 * dir);
            REQUIRE(pr);
            CHECK(pr->x == doctest::Approx(px));
            CHECK(pr->y == doctest::Approx(py));
            CHECK(pr->depth == doctest::Approx(3.5));
        }
    CHECK_FALSE(cam.project(cam.position - cam.forward));
    CameraPose degenerate = cam;
    degenerate.up = degenerate.forward;
    CHECK_THROWS_AS(degenerate.orthonormalized(), std::invalid_argument);
}

TEST_CASE("trajectory scene state")
{
    const Scene base = sphere_over_plane(1.0, 4.0, 2.0);
    Trajectory traj;
    traj.camera = two_keys();
    traj.emitter = {{0.0, Vec3(0, 4, 0)}, {1.0, Vec3(1, 4, 0)}};
    traj.objects = {ObjectTrack{1, {{0.0, Vec3::Zero()}, {1.0, Vec3(0, 0.5, 0)}}}};
    CHECK_NOTHROW(traj.validate());
    CHECK(traj.time_range() == std::pair<double, double>(0.0, 1.0));
    const Scene s = traj.scene_at(base, 0.5);
    CHECK((s.emitter().center - Vec3(0.5, 4, 0)).norm() < 1e-15);
    CHECK(s.emitter().size_index == 2.0);
    const auto& ball = std::get<Sphere>(s.objects()[1].shape);
    CHECK((ball.center - Vec3(0, 1.25, 0)).norm() < 1e-15);

    traj.objects[0].object = 5;
    CHECK_THROWS_AS(traj.scene_at(base, 0.5), std::out_of_range);
}
