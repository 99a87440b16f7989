#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace fvv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Raised for invalid input (bad files, violated invariants, mismatched
// dimensions). Pipeline stages rethrow with a stage tag prepended.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Axis-aligned box in world millimetres.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (min.array() < max.array()).all(); }
  Vec3 extent() const { return max - min; }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

// Worker count used by every parallel loop in the library. 0 selects
// std::thread::hardware_concurrency(). Results never depend on this value.
void set_num_threads(unsigned n);
unsigned num_threads();

// Splits [begin, end) into contiguous chunks whose boundaries are multiples
// of `grain` (except the last) and runs fn(chunk_begin, chunk_end) on the
// worker pool. Blocks until all chunks are done; rethrows the first error.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace fvv
