#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace mbd {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }

  double& operator()(int row, int col) { return m[row * 3 + col]; }
  double operator()(int row, int col) const { return m[row * 3 + col]; }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// Pinhole camera, pixel units.
struct Intrinsics {
  double fx, fy, cx, cy;

  Intrinsics(double fx_, double fy_, double cx_, double cy_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(cx) || !std::isfinite(cy)) {
      throw std::invalid_argument("intrinsics: focal lengths must be positive and finite");
    }
  }

  // Intrinsics of the same camera at a resolution scaled by (sx, sy).
  Intrinsics scaled(double sx, double sy) const {
    return Intrinsics(fx * sx, fy * sy, cx * sx, cy * sy);
  }
};

// Homogeneous 3D point; w stays 1 through rigid transforms.
struct Point3H {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 vec() const { return {x, y, z}; }
};

// Continuous pixel coordinate (u = column, v = row).
struct PixelCoord {
  double u = 0.0, v = 0.0;
};

struct InvalidPoseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rigid (or near-rigid) camera-to-reference transform [R | t]. Poses built
// from the small-angle layout are flagged approximate: they are orthonormal
// only to second order and are exempt from the exact-rigidity check.
class Pose {
 public:
  static Pose identity() { return Pose(Mat3::identity(), Vec3{}, false); }

  // Small-angle rotation layout: ones on the diagonal, +/- rotation
  // components off-diagonal.
  static Pose small_angle(const Vec3& r, const Vec3& t) {
    Mat3 R;
    R.m = {1.0, -r.z, r.y, r.z, 1.0, -r.x, -r.y, r.x, 1.0};
    return Pose(R, t, true);
  }

  // Exact rigid pose; validates orthonormality and unit determinant.
  static Pose exact(const Mat3& R, const Vec3& t) {
    const Mat3 gram = R.transposed() * R;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double want = i == j ? 1.0 : 0.0;
        if (std::abs(gram(i, j) - want) > 1e-9) {
          throw InvalidPoseError("pose: rotation is not orthonormal");
        }
      }
    }
    if (std::abs(R.det() - 1.0) > 1e-9) {
      throw InvalidPoseError("pose: rotation determinant is not 1");
    }
    return Pose(R, t, false);
  }

  // Exact rotation about axis r by angle |r| (closed-form exponential map).
  static Pose from_axis_angle(const Vec3& r, const Vec3& t) {
    return Pose(rotation_exp(r), t, false);
  }

  static Mat3 rotation_exp(const Vec3& r) {
    const double theta = r.norm();
    if (theta < 1e-14) return Mat3::identity();
    const Vec3 a = r * (1.0 / theta);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double k = 1.0 - c;
    Mat3 R;
    R.m = {c + a.x * a.x * k,      a.x * a.y * k - a.z * s, a.x * a.z * k + a.y * s,
           a.y * a.x * k + a.z * s, c + a.y * a.y * k,      a.y * a.z * k - a.x * s,
           a.z * a.x * k - a.y * s, a.z * a.y * k + a.x * s, c + a.z * a.z * k};
    return R;
  }

  const Mat3& rotation() const { return rot_; }
  const Vec3& translation() const { return trans_; }
  bool approximate() const { return approx_; }

  Pose inverse() const {
    if (!approx_) {
      const Mat3 rt = rot_.transposed();
      return Pose(rt, -(rt * trans_), false);
    }
    // Approximate poses are not orthonormal; invert the 3x3 numerically.
    const double d = rot_.det();
    if (std::abs(d) < 1e-12) {
      throw InvalidPoseError("pose: singular rotation, cannot invert");
    }
    Mat3 inv;
    const auto& m = rot_.m;
    inv.m = {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
             (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
             (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
             (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
             (m[0] * m[4] - m[1] * m[3]) / d};
    return Pose(inv, -(inv * trans_), true);
  }

  // this after other: (this * other) x = this(other(x)).
  Pose compose(const Pose& other) const {
    return Pose(rot_ * other.rot_, rot_ * other.trans_ + trans_,
                approx_ || other.approx_);
  }

  Point3H transform(const Point3H& p) const {
    const Vec3 v = rot_ * p.vec() + trans_;
    return {v.x, v.y, v.z};
  }

 private:
  Pose(const Mat3& R, const Vec3& t, bool approx)
      : rot_(R), trans_(t), approx_(approx) {}

  Mat3 rot_;
  Vec3 trans_;
  bool approx_;
};

inline constexpr double kProjectZMin = 1e-6;  // meters

// Perspective projection; nullopt when the point is at or behind the camera
// plane (callers drop the sample).
inline std::optional<PixelCoord> project(const Point3H& p, const Intrinsics& K,
                                         double z_min = kProjectZMin) {
  if (!(p.z > z_min)) return std::nullopt;
  return PixelCoord{K.fx * p.x / p.z + K.cx, K.fy * p.y / p.z + K.cy};
}

struct InvalidDepthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pixel + z-depth back to a 3D point.
inline Point3H unproject(const PixelCoord& x, double z, const Intrinsics& K) {
  if (!(z > 0.0)) throw InvalidDepthError("unproject: depth must be positive");
  return {z * (x.u - K.cx) / K.fx, z * (x.v - K.cy) / K.fy, z};
}

}  // namespace mbd
