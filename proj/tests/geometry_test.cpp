#include <catch2/catch_amalgamated.hpp>

#include "bitvo/geometry.hpp"
#include "test_util.hpp"

using namespace bitvo;

TEST_CASE("transform_point basics") {
  SECTION("identity") {
    RigidTransform T;
    const Point3 p(1, 2, 3);
    REQUIRE((transform_point(T, p) - p).norm() == 0.0);
  }
  SECTION("180 degree yaw flips x") {
    RigidTransform T;
    T.rotation = quat_from_rotvec(Eigen::Vector3d(0, 0, kPi));
    const Point3 q = transform_point(T, Point3(1, 0, 0));
    REQUIRE((q - Point3(-1, 0, 0)).norm() < 1e-12);
  }
  SECTION("inverse round-trip") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
      const RigidTransform T = testutil::random_transform(rng);
      const Point3 p(10.0 * testutil::random_unit_vector(rng));
      const Point3 back = transform_point(T.inverse(), transform_point(T, p));
      REQUIRE((back - p).norm() < 1e-9);
    }
  }
}

TEST_CASE("rigid transform algebra") {
  std::mt19937_64 rng(11);
  SECTION("compose with inverse is identity") {
    for (int i = 0; i < 100; ++i) {
      const RigidTransform T = testutil::random_transform(rng);
      const RigidTransform I = T * T.inverse();
      REQUIRE(rotation_angle(I.rotation, Eigen::Quaterniond::Identity()) < 1e-9);
      REQUIRE(I.translation.norm() < 1e-9);
      REQUIRE(std::abs(I.rotation.norm() - 1.0) < 1e-9);
    }
  }
  SECTION("compose is associative") {
    for (int i = 0; i < 100; ++i) {
      const RigidTransform A = testutil::random_transform(rng);
      const RigidTransform B = testutil::random_transform(rng);
      const RigidTransform C = testutil::random_transform(rng);
      const RigidTransform left = (A * B) * C;
      const RigidTransform right = A * (B * C);
      REQUIRE(rotation_angle(left.rotation, right.rotation) < 1e-9);
      REQUIRE((left.translation - right.translation).norm() < 1e-9);
    }
  }
}

TEST_CASE("pinhole projection") {
  CameraIntrinsics K;
  SECTION("optical axis") {
    const auto u = project(K, Point3(0, 0, 1));
    REQUIRE(u.has_value());
    REQUIRE((*u - PixelPoint(128, 128)).norm() < 1e-12);
  }
  SECTION("off axis") {
    const auto u = project(K, Point3(1, 0, 2));
    REQUIRE(u.has_value());
    REQUIRE((*u - PixelPoint(208, 128)).norm() < 1e-12);
  }
  SECTION("behind camera is invisible") {
    REQUIRE_FALSE(project(K, Point3(0, 0, -1)).has_value());
    REQUIRE_FALSE(project(K, Point3(0.3, 0.1, 0.0)).has_value());
  }
  SECTION("projection is invariant under a world gauge change") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      const RigidTransform T = testutil::random_transform(rng);
      const RigidTransform M = testutil::random_transform(rng);
      const Point3 p = Point3(0.4, -0.2, 0.1) + 3.0 * testutil::random_unit_vector(rng);
      const Point3 in_cam = transform_point(T, p);
      if (in_cam.z() <= 0.1) continue;
      const auto direct = project(K, in_cam);
      const auto gauged = project(K, transform_point(T * M.inverse(), transform_point(M, p)));
      REQUIRE(direct.has_value());
      REQUIRE(gauged.has_value());
      REQUIRE((*direct - *gauged).norm() < 1e-7);
    }
  }
}

TEST_CASE("triangulation") {
  CameraIntrinsics K;
  SECTION("recovers a noise-free point") {
    RigidTransform T_a;  // world == camera a
    RigidTransform T_b;
    T_b.translation = Point3(-0.2, 0, 0);  // camera b at (0.2, 0, 0)
    const Point3 p(0, 0, 2);
    const auto u_a = project(K, transform_point(T_a, p));
    const auto u_b = project(K, transform_point(T_b, p));
    REQUIRE(u_a.has_value());
    REQUIRE(u_b.has_value());
    const auto result = triangulate(T_a, T_b, *u_a, *u_b, K);
    REQUIRE(result.ok());
    REQUIRE((result.point - p).norm() < 1e-6);
  }
  SECTION("identical poses are degenerate") {
    RigidTransform T;
    const auto result = triangulate(T, T, PixelPoint(100, 100), PixelPoint(120, 100), K);
    REQUIRE(result.status == TriangulationStatus::kDegenerateBaseline);
  }
  SECTION("point behind a camera is rejected") {
    RigidTransform T_a;
    RigidTransform T_b;
    T_b.translation = Point3(0, 0, -5);  // camera b at (0, 0, 5) looking +z
    const Point3 p(0.2, 0.1, 2.0);      // in front of a, 3 m behind b
    const auto u_a = project(K, transform_point(T_a, p));
    REQUIRE(u_a.has_value());
    const Point3 p_b = transform_point(T_b, p);
    REQUIRE(p_b.z() < 0.0);
    const PixelPoint u_b(K.fx * p_b.x() / p_b.z() + K.cx, K.fy * p_b.y() / p_b.z() + K.cy);
    const auto result = triangulate(T_a, T_b, *u_a, u_b, K);
    REQUIRE(result.status == TriangulationStatus::kBehindCamera);
  }
  SECTION("exact inverse of projection up to 100 m depth") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> depth(0.5, 100.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    while (checked < 200) {
      RigidTransform T_a = testutil::random_transform(rng, 0.4, 1.0);
      RigidTransform T_b = testutil::random_transform(rng, 0.4, 1.0);
      if ((T_a.inverse().translation - T_b.inverse().translation).norm() < 0.05) continue;
      const Point3 p_cam(0.3 * u(rng), 0.3 * u(rng), 1.0);
      const Point3 p = T_a.inverse() * (depth(rng) * p_cam.normalized());
      const Point3 in_a = transform_point(T_a, p);
      const Point3 in_b = transform_point(T_b, p);
      if (in_a.z() <= 0.1 || in_b.z() <= 0.1) continue;
      const auto u_a = project(K, in_a);
      const auto u_b = project(K, in_b);
      if (!u_a || !u_b) continue;
      const auto result = triangulate(T_a, T_b, *u_a, *u_b, K);
      REQUIRE(result.ok());
      REQUIRE((result.point - p).norm() < 1e-6);
      ++checked;
    }
  }
}

TEST_CASE("parallax angle") {
  SECTION("right angle") {
    const auto a = parallax_degrees(Point3(1, 0, 0), Point3(-1, 0, 0), Point3(0, 0, 1));
    REQUIRE(a.has_value());
    REQUIRE(std::abs(*a - 90.0) < 1e-9);
  }
  SECTION("coincident centers") {
    const auto a = parallax_degrees(Point3(1, 2, 3), Point3(1, 2, 3), Point3(0, 0, 0));
    REQUIRE(a.has_value());
    REQUIRE(*a == 0.0);
  }
  SECTION("small baseline closed form") {
    const auto a = parallax_degrees(Point3(0, 0, 0), Point3(0.1, 0, 0), Point3(0, 0, 10));
    REQUIRE(a.has_value());
    REQUIRE(std::abs(*a - rad2deg(std::atan(0.01))) < 1e-9);
  }
  SECTION("degenerate ray") {
    REQUIRE_FALSE(parallax_degrees(Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 0, 0)).has_value());
  }
}
