#pragma once

#include <string>
#include <vector>

#include "gvlad/types.hpp"

namespace gvlad {

struct Dataset {
  int dim = 0;  // D_F
  std::vector<ExampleRecord> records;
};

enum class DatasetFormat { Binary, Jsonl };

// GVD1 binary or gvd-jsonl text, chosen explicitly on write. Read sniffs the
// magic bytes. Binary round-trips are bit-exact (descriptors stored as f32).
void write_dataset(const std::string& path, int dim,
                   const std::vector<ExampleRecord>& records,
                   DatasetFormat format = DatasetFormat::Binary);

Dataset read_dataset(const std::string& path);

}  // namespace gvlad
