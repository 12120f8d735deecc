#pragma once

#include <cstdint>
#include <string>

#include "evoclass/data.hpp"
#include "evoclass/dne.hpp"
#include "evoclass/model.hpp"
#include "evoclass/sgd.hpp"

namespace evoclass {

// Declarative run configuration. Every field maps to a dotted key in the
// sectioned config file and to a CLI flag of the same name
// (e.g. [dne] sigma=0.02  <->  --dne.sigma 0.02).
struct DataConfig {
  std::string source = "generate";  // generate | manifest | micro
  std::string manifest;             // required when source == manifest
  CorpusSpec corpus;

  void validate() const;
};

struct RunConfig {
  ArchitectureConfig arch;
  DneConfig dne;
  SgdConfig sgd;
  DataConfig data;
  std::string output_dir = "out";
  uint64_t seed = 0;
  int workers = 1;
  bool force = false;

  void validate() const;
};

}  // namespace evoclass
