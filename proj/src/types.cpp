#include "gvlad/types.hpp"

namespace gvlad {

Descriptor normalize(const Eigen::VectorXd& v) {
  double n = v.norm();
  if (n < 1e-12) throw ZeroVector("cannot normalize a (near-)zero vector");
  return v / n;
}

}  // namespace gvlad
