#include "evoclass/config.hpp"

#include "evoclass/errors.hpp"

namespace evoclass {

void DataConfig::validate() const {
  if (source != "generate" && source != "manifest" && source != "micro")
    throw ArgumentError("data.source must be generate, manifest or micro");
  if (source == "manifest" && manifest.empty())
    throw ArgumentError("data.source=manifest requires data.manifest");
  if (source != "manifest" && !manifest.empty())
    throw ArgumentError("exactly one data source: data.manifest is set but "
                        "data.source is '" + source + "'");
  if (source == "generate") corpus.validate();
}

void RunConfig::validate() const {
  arch.validate();
  data.validate();
  if (workers < 1) throw ArgumentError("workers must be >= 1");
  if (output_dir.empty()) throw ArgumentError("output_dir must not be empty");
}

}  // namespace evoclass
