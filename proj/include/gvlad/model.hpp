#pragma once

#include <cstdint>
#include <string>

#include "gvlad/ghostvlad.hpp"
#include "gvlad/head.hpp"

namespace gvlad {

// Full model: aggregation + head, plus the training-time classifier
// (T x D, empty once stripped).
struct Model {
  GhostVladParams gv;
  HeadParams head;
  Eigen::MatrixXd classifier;  // 0x0 when stripped
  std::uint64_t timestamp = 0;

  int dim_f() const { return gv.dim(); }
  int dim_out() const { return head.out_dim(); }
  void check() const;
};

// GVM1 model file. All arrays stored as little-endian f32 and widened to
// f64 on load.
void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

// Fresh model with zeroed/identity-default parameters, classifier included
// when t_identities > 0.
Model make_model(int d_f, int k, int g, int d, int t_identities);

}  // namespace gvlad
