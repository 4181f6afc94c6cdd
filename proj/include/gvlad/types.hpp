#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gvlad/common.hpp"

namespace gvlad {

// Unit-norm D_F-dimensional face descriptor.
using Descriptor = Eigen::VectorXd;

enum class SourceKind : std::uint8_t { Still = 0, VideoFrame = 1 };
enum class QualityTag : std::uint8_t { Clean = 0, Degraded = 1 };

struct ExampleRecord {
  Descriptor descriptor;
  std::uint32_t identity = 0;
  std::uint32_t media_id = 0;
  SourceKind source_kind = SourceKind::Still;
  // Metadata only. Nothing on the model/training path may look at this;
  // it exists for evaluation and analysis.
  QualityTag quality_tag = QualityTag::Clean;
};

// A set of examples of one subject.
struct Template {
  std::vector<ExampleRecord> records;
  std::uint32_t subject = 0;
};

// v / ||v||_2; throws ZeroVector when the norm is below 1e-12.
Descriptor normalize(const Eigen::VectorXd& v);

}  // namespace gvlad
