#include "gvlad/model.hpp"

#include <cstring>
#include <fstream>

namespace gvlad {

namespace {

constexpr char kMagic[4] = {'G', 'V', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated model file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t lo = get_u32(is);
  std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

// row-major f32 array
void put_array(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      float f = static_cast<float>(m(i, j));
      std::uint32_t v;
      std::memcpy(&v, &f, 4);
      put_u32(os, v);
    }
}

Eigen::MatrixXd get_array(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::uint32_t v = get_u32(is);
      float f;
      std::memcpy(&f, &v, 4);
      m(i, j) = static_cast<double>(f);
    }
  return m;
}

}  // namespace

void Model::check() const {
  gv.check();
  head.check();
  if (head.in_dim() != gv.dim() * gv.num_clusters)
    throw DimMismatch("head input dim != D_F*K");
  if (classifier.size() > 0 && classifier.cols() != head.out_dim())
    throw DimMismatch("classifier columns != D");
}

void save_model(const std::string& path, const Model& m) {
  m.check();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(m.dim_f()));
  put_u32(os, static_cast<std::uint32_t>(m.gv.num_clusters));
  put_u32(os, static_cast<std::uint32_t>(m.gv.num_ghosts));
  put_u32(os, static_cast<std::uint32_t>(m.dim_out()));
  put_u32(os, static_cast<std::uint32_t>(m.classifier.rows()));
  put_u64(os, m.timestamp);
  put_array(os, m.gv.assign_w);
  put_array(os, m.gv.assign_b);
  put_array(os, m.gv.centers);
  put_array(os, m.head.proj);
  put_array(os, m.head.proj_bias);
  put_array(os, m.head.bn_gamma);
  put_array(os, m.head.bn_beta);
  put_array(os, m.head.bn_mean);
  put_array(os, m.head.bn_var);
  if (m.classifier.rows() > 0) put_array(os, m.classifier);
  if (!os) throw FormatError("write failure on " + path);
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad model magic in " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw FormatError("unsupported GVM version " + std::to_string(version));
  int d_f = static_cast<int>(get_u32(is));
  int k = static_cast<int>(get_u32(is));
  int g = static_cast<int>(get_u32(is));
  int d = static_cast<int>(get_u32(is));
  int t = static_cast<int>(get_u32(is));
  std::uint64_t timestamp = get_u64(is);

  Model m;
  m.timestamp = timestamp;
  m.gv.num_clusters = k;
  m.gv.num_ghosts = g;
  m.gv.assign_w = get_array(is, k + g, d_f);
  m.gv.assign_b = get_array(is, k + g, 1);
  m.gv.centers = get_array(is, k, d_f);
  m.head.proj = get_array(is, d, static_cast<Eigen::Index>(d_f) * k);
  m.head.proj_bias = get_array(is, d, 1);
  m.head.bn_gamma = get_array(is, d, 1);
  m.head.bn_beta = get_array(is, d, 1);
  m.head.bn_mean = get_array(is, d, 1);
  m.head.bn_var = get_array(is, d, 1);
  if (t > 0) m.classifier = get_array(is, t, d);
  char extra;
  if (is.read(&extra, 1)) throw FormatError("trailing bytes in " + path);
  m.check();
  return m;
}

Model make_model(int d_f, int k, int g, int d, int t_identities) {
  Model m;
  m.gv.num_clusters = k;
  m.gv.num_ghosts = g;
  m.gv.assign_w = Eigen::MatrixXd::Zero(k + g, d_f);
  m.gv.assign_b = Eigen::VectorXd::Zero(k + g);
  m.gv.centers = Eigen::MatrixXd::Zero(k, d_f);
  m.head.proj = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(d_f) * k);
  m.head.proj_bias = Eigen::VectorXd::Zero(d);
  m.head.bn_gamma = Eigen::VectorXd::Ones(d);
  m.head.bn_beta = Eigen::VectorXd::Zero(d);
  m.head.bn_mean = Eigen::VectorXd::Zero(d);
  m.head.bn_var = Eigen::VectorXd::Ones(d);
  if (t_identities > 0)
    m.classifier = Eigen::MatrixXd::Zero(t_identities, d);
  return m;
}

}  // namespace gvlad
